#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qednet {

// Contract checks for caller errors (shape mismatches, bad indices).
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// H x W x C tensor, channels-last, row-major over (y, x).
struct Tensor {
  int h = 0, w = 0, c = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_) {
    v.assign(static_cast<std::size_t>(h) * w * c, 0.0);
  }

  std::size_t size() const { return v.size(); }
  std::size_t idx(int y, int x, int ch) const {
    return (static_cast<std::size_t>(y) * w + x) * c + ch;
  }
  double& at(int y, int x, int ch) { return v[idx(y, x, ch)]; }
  double at(int y, int x, int ch) const { return v[idx(y, x, ch)]; }
  // First channel of pixel (y, x); channels are contiguous.
  double* pixel(int y, int x) { return v.data() + idx(y, x, 0); }
  const double* pixel(int y, int x) const { return v.data() + idx(y, x, 0); }
};

// H x W real map.
struct Map {
  int h = 0, w = 0;
  std::vector<double> v;

  Map() = default;
  Map(int h_, int w_, double fill = 0.0) : h(h_), w(w_) {
    v.assign(static_cast<std::size_t>(h) * w, fill);
  }

  std::size_t size() const { return v.size(); }
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const {
    return v[static_cast<std::size_t>(y) * w + x];
  }
};

// H x W binary map (values 0/1).
struct Mask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int h_, int w_, std::uint8_t fill = 0) : h(h_), w(w_) {
    v.assign(static_cast<std::size_t>(h) * w, fill);
  }

  std::size_t size() const { return v.size(); }
  std::uint8_t& at(int y, int x) {
    return v[static_cast<std::size_t>(y) * w + x];
  }
  std::uint8_t at(int y, int x) const {
    return v[static_cast<std::size_t>(y) * w + x];
  }
};

}  // namespace qednet
