#include "qednet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "qednet/container.hpp"
#include "qednet/rng.hpp"

namespace qednet::data {

namespace {

constexpr const char* kRasterMagic = "MQRASTR1";

nlohmann::json parse_header(const std::string& text,
                            const std::filesystem::path& path) {
  nlohmann::json h = nlohmann::json::parse(text, nullptr, false);
  if (h.is_discarded() || !h.is_object()) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": header is not a JSON object");
  }
  return h;
}

// Mirror about the edge pixel (index n maps to n-2); handles arbitrary
// overshoot so large tile padding stays well-defined.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  int j = i % period;
  if (j < 0) j += period;
  return j < n ? j : period - j;
}

}  // namespace

const std::vector<std::string>& default_band_names() {
  static const std::vector<std::string> names{
      "Aerosols", "Blue",     "Green",    "Red",       "RedEdge1", "RedEdge2",
      "RedEdge3", "NIR",      "RedEdge4", "WaterVapor", "SWIR1",   "SWIR2"};
  return names;
}

Raster read_raster(const std::filesystem::path& path) {
  const ContainerPayload c = read_container(path, kRasterMagic);
  const nlohmann::json h = parse_header(c.header_json, path);

  Raster r;
  try {
    r.height = h.at("height").get<int>();
    r.width = h.at("width").get<int>();
    r.bands = h.at("bands").get<int>();
    r.band_names = h.at("band_names").get<std::vector<std::string>>();
    r.scale = h.value("scale", 1.0);
    const std::string dtype = h.at("dtype").get<std::string>();
    const std::string layout = h.at("layout").get<std::string>();
    if (dtype != "f32le" || layout != "bsq") {
      throw ContainerError(ContainerErrorKind::HeaderInvalid,
                           path.string() + ": expected f32le/bsq raster");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": " + e.what());
  }
  if (r.height <= 0 || r.width <= 0 || r.bands <= 0 ||
      static_cast<int>(r.band_names.size()) != r.bands) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": inconsistent raster header");
  }
  const std::size_t n =
      static_cast<std::size_t>(r.height) * r.width * r.bands;
  if (c.payload.size() != n * sizeof(float)) {
    throw ContainerError(ContainerErrorKind::Truncated,
                         path.string() + ": payload size mismatch");
  }
  r.values.resize(n);
  std::memcpy(r.values.data(), c.payload.data(), c.payload.size());
  return r;
}

void write_raster(const std::filesystem::path& path, const Raster& r) {
  require(r.height > 0 && r.width > 0 && r.bands > 0, "empty raster");
  require(static_cast<int>(r.band_names.size()) == r.bands,
          "band_names must match band count");
  require(r.values.size() ==
              static_cast<std::size_t>(r.height) * r.width * r.bands,
          "raster value count mismatch");
  nlohmann::json h{{"height", r.height},   {"width", r.width},
                   {"bands", r.bands},     {"band_names", r.band_names},
                   {"dtype", "f32le"},     {"layout", "bsq"},
                   {"scale", r.scale}};
  write_container(path, kRasterMagic, h.dump(), r.values.data(),
                  r.values.size() * sizeof(float));
}

Mask read_mask(const std::filesystem::path& path) {
  const ContainerPayload c = read_container(path, kRasterMagic);
  const nlohmann::json h = parse_header(c.header_json, path);

  Mask m;
  int bands = 0;
  try {
    m.h = h.at("height").get<int>();
    m.w = h.at("width").get<int>();
    bands = h.at("bands").get<int>();
    const std::string dtype = h.at("dtype").get<std::string>();
    if (dtype != "u8") {
      throw ContainerError(ContainerErrorKind::HeaderInvalid,
                           path.string() + ": expected u8 mask");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": " + e.what());
  }
  if (m.h <= 0 || m.w <= 0 || bands != 1) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": inconsistent mask header");
  }
  const std::size_t n = static_cast<std::size_t>(m.h) * m.w;
  if (c.payload.size() != n) {
    throw ContainerError(ContainerErrorKind::Truncated,
                         path.string() + ": payload size mismatch");
  }
  m.v.assign(c.payload.begin(), c.payload.end());
  for (auto& b : m.v) b = b ? 1 : 0;
  return m;
}

void write_mask(const std::filesystem::path& path, const Mask& m) {
  require(m.h > 0 && m.w > 0, "empty mask");
  require(m.v.size() == static_cast<std::size_t>(m.h) * m.w,
          "mask value count mismatch");
  nlohmann::json h{{"height", m.h},
                   {"width", m.w},
                   {"bands", 1},
                   {"band_names", std::vector<std::string>{"mask"}},
                   {"dtype", "u8"},
                   {"layout", "bsq"},
                   {"scale", 1.0}};
  write_container(path, kRasterMagic, h.dump(), m.v.data(), m.v.size());
}

std::size_t normalize(Raster& r, double scale) {
  require(scale > 0.0, "normalization scale must be positive");
  std::size_t clamped = 0;
  for (float& v : r.values) {
    const double t = static_cast<double>(v) / scale;
    if (t < 0.0) {
      v = 0.0f;
      ++clamped;
    } else if (t > 1.0) {
      v = 1.0f;
      ++clamped;
    } else {
      v = static_cast<float>(t);
    }
  }
  r.scale = 1.0;
  return clamped;
}

PaddedRaster pad_even(const Raster& r) {
  require(r.height >= 2 && r.width >= 2, "raster smaller than 2x2");
  const int ph = r.height + (r.height % 2);
  const int pw = r.width + (r.width % 2);

  PaddedRaster out;
  out.raster.height = ph;
  out.raster.width = pw;
  out.raster.bands = r.bands;
  out.raster.band_names = r.band_names;
  out.raster.scale = r.scale;
  out.raster.values.resize(static_cast<std::size_t>(ph) * pw * r.bands);
  for (int b = 0; b < r.bands; ++b) {
    for (int y = 0; y < ph; ++y) {
      const int sy = reflect_index(y, r.height);
      for (int x = 0; x < pw; ++x) {
        out.raster.at(y, x, b) = r.at(sy, reflect_index(x, r.width), b);
      }
    }
  }
  out.valid = Mask(ph, pw, 0);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) out.valid.at(y, x) = 1;
  }
  return out;
}

Mask pad_even_mask(const Mask& m) {
  const int ph = m.h + (m.h % 2);
  const int pw = m.w + (m.w % 2);
  Mask out(ph, pw);
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y, m.h);
    for (int x = 0; x < pw; ++x) {
      out.at(y, x) = m.at(sy, reflect_index(x, m.w));
    }
  }
  return out;
}

std::vector<Patch> extract_patches(const Raster& raster, const Mask& gt,
                                   int size, int stride) {
  require(size >= 2 && size % 2 == 0, "patch size must be even");
  require(stride >= 1, "stride must be positive");
  require(gt.h == raster.height && gt.w == raster.width,
          "ground truth shape mismatch");

  const PaddedRaster padded = pad_even(raster);
  const Mask padded_gt = pad_even_mask(gt);
  const int ph = padded.raster.height, pw = padded.raster.width;

  std::vector<Patch> patches;
  for (int y0 = 0; y0 < ph; y0 += stride) {
    for (int x0 = 0; x0 < pw; x0 += stride) {
      Patch p;
      p.y0 = y0;
      p.x0 = x0;
      p.raster.height = size;
      p.raster.width = size;
      p.raster.bands = raster.bands;
      p.raster.band_names = raster.band_names;
      p.raster.scale = raster.scale;
      p.raster.values.resize(static_cast<std::size_t>(size) * size *
                             raster.bands);
      p.gt = Mask(size, size);
      p.valid = Mask(size, size, 0);
      for (int y = 0; y < size; ++y) {
        const bool row_in = y0 + y < ph;
        const int sy = row_in ? y0 + y : y0 + reflect_index(y, ph - y0);
        for (int x = 0; x < size; ++x) {
          const bool col_in = x0 + x < pw;
          const int sx = col_in ? x0 + x : x0 + reflect_index(x, pw - x0);
          for (int b = 0; b < raster.bands; ++b) {
            p.raster.at(y, x, b) = padded.raster.at(sy, sx, b);
          }
          p.gt.at(y, x) = padded_gt.at(sy, sx);
          p.valid.at(y, x) =
              (row_in && col_in) ? padded.valid.at(sy, sx) : 0;
        }
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

Tensor tensor_from_raster(const Raster& r) {
  Tensor t(r.height, r.width, r.bands);
  for (int b = 0; b < r.bands; ++b) {
    for (int y = 0; y < r.height; ++y) {
      for (int x = 0; x < r.width; ++x) {
        t.at(y, x, b) = static_cast<double>(r.at(y, x, b));
      }
    }
  }
  return t;
}

SynthSpec::SynthSpec()
    : templates{{{0.08, 0.07, 0.06, 0.04, 0.03, 0.02, 0.02, 0.02, 0.02, 0.03,
                  0.01, 0.01},   // water
                 {0.05, 0.04, 0.10, 0.06, 0.14, 0.30, 0.38, 0.52, 0.40, 0.22,
                  0.16, 0.07},   // mangrove: high NIR, moderate green
                 {0.06, 0.05, 0.09, 0.08, 0.16, 0.24, 0.28, 0.38, 0.30, 0.18,
                  0.34, 0.24},   // upland vegetation: drier (higher SWIR1)
                 {0.14, 0.16, 0.20, 0.26, 0.29, 0.31, 0.33, 0.36, 0.34, 0.26,
                  0.44, 0.38}}}  // bare soil
{}

SynthScene synth_scene(const SynthSpec& spec) {
  require(spec.height >= 2 && spec.width >= 2, "scene smaller than 2x2");
  require(spec.noise_std >= 0.0, "noise std must be non-negative");
  require(spec.blob_count >= 1, "need at least one blob");

  Rng rng(spec.seed);
  const int h = spec.height, w = spec.width;
  const double rmin = spec.radius_min_frac * std::min(h, w);
  const double rmax = spec.radius_max_frac * std::min(h, w);

  struct Blob {
    double cy, cx, r0, a1, a2, p1, p2;
    int cls;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < spec.blob_count; ++i) {
    Blob b;
    b.cy = rng.uniform(0.0, h);
    b.cx = rng.uniform(0.0, w);
    b.r0 = rng.uniform(rmin, rmax);
    b.a1 = rng.uniform(0.0, spec.wobble);
    b.a2 = rng.uniform(0.0, spec.wobble * 0.6);
    b.p1 = rng.uniform(0.0, 6.2831853071795864769);
    b.p2 = rng.uniform(0.0, 6.2831853071795864769);
    b.cls = 1 + i % 3;  // cycle mangrove / upland / soil
    blobs.push_back(b);
  }

  std::vector<std::uint8_t> cls(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const Blob& b : blobs) {
        const double dy = y - b.cy, dx = x - b.cx;
        const double dist = std::sqrt(dy * dy + dx * dx);
        const double phi = std::atan2(dy, dx);
        const double r = b.r0 * (1.0 + b.a1 * std::sin(2.0 * phi + b.p1) +
                                 b.a2 * std::sin(3.0 * phi + b.p2));
        if (dist <= r) cls[static_cast<std::size_t>(y) * w + x] =
            static_cast<std::uint8_t>(b.cls);
      }
    }
  }

  SynthScene scene;
  scene.raster.height = h;
  scene.raster.width = w;
  scene.raster.bands = kModelBands;
  scene.raster.band_names = default_band_names();
  scene.raster.scale = 1.0;
  scene.raster.values.resize(static_cast<std::size_t>(h) * w * kModelBands);
  // Noise drawn in storage (band-sequential) order.
  for (int b = 0; b < kModelBands; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int c = cls[static_cast<std::size_t>(y) * w + x];
        double v = spec.templates[static_cast<std::size_t>(c)]
                                 [static_cast<std::size_t>(b)];
        if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
        scene.raster.at(y, x, b) =
            static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
      }
    }
  }
  scene.mask = Mask(h, w);
  for (std::size_t i = 0; i < cls.size(); ++i) {
    scene.mask.v[i] = cls[i] == 1 ? 1 : 0;
  }
  return scene;
}

}  // namespace qednet::data
