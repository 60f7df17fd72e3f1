#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qednet/tensor.hpp"

// Raster container I/O, normalization, padding/patching, and the seeded
// synthetic scene generator used for desk-scale experiments.
//
// Raster container (.mqr): magic "MQRASTR1"; u32 LE header length; UTF-8
// JSON header {"height","width","bands","band_names","dtype":"f32le",
// "layout":"bsq","scale"}; H*W*C little-endian float32 in band-sequential
// order; 8-byte FNV-1a checksum of the payload. Masks (.mqm) use the same
// framing with dtype "u8" and a single band.
namespace qednet::data {

inline constexpr int kModelBands = 12;

struct Raster {
  int height = 0, width = 0, bands = 0;
  std::vector<std::string> band_names;
  double scale = 1.0;  // 1.0 marks already-normalized reflectance
  std::vector<float> values;  // band-sequential: ((b*H)+y)*W + x

  float at(int y, int x, int b) const {
    return values[(static_cast<std::size_t>(b) * height + y) * width + x];
  }
  float& at(int y, int x, int b) {
    return values[(static_cast<std::size_t>(b) * height + y) * width + x];
  }
};

// The Sentinel-2 band list the model is built around.
const std::vector<std::string>& default_band_names();

Raster read_raster(const std::filesystem::path& path);
void write_raster(const std::filesystem::path& path, const Raster& raster);

Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

// In-place v := clamp(v / scale, 0, 1); returns the number of clamped
// values and marks the raster normalized (scale = 1).
std::size_t normalize(Raster& raster, double scale = 10000.0);

// Reflect-pad (mirror about the edge pixel) on the bottom/right so both
// dimensions are even; `valid` is 1 on original pixels.
struct PaddedRaster {
  Raster raster;
  Mask valid;
};
PaddedRaster pad_even(const Raster& raster);
Mask pad_even_mask(const Mask& mask);

struct Patch {
  Raster raster;
  Mask gt;
  Mask valid;
  int y0 = 0, x0 = 0;  // origin inside the even-padded raster
};

// Deterministic tiling of the even-padded raster; final partial tiles are
// reflect-padded to the full patch size and their padding is excluded via
// the validity mask.
std::vector<Patch> extract_patches(const Raster& raster, const Mask& gt,
                                   int size = 256, int stride = 256);

// Channels-last double tensor view of a raster.
Tensor tensor_from_raster(const Raster& raster);

struct SynthSpec {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  // Class templates over the 12 default bands: water (background), mangrove,
  // upland vegetation, bare soil.
  std::array<std::array<double, kModelBands>, 4> templates;
  double noise_std = 0.03;
  int blob_count = 8;
  double radius_min_frac = 0.10;  // of min(height, width)
  double radius_max_frac = 0.28;
  double wobble = 0.25;  // boundary perturbation amplitude

  SynthSpec();
};

struct SynthScene {
  Raster raster;  // scale = 1, values already in [0, 1]
  Mask mask;      // 1 on mangrove pixels
};

// Smooth random blobs assign class regions over a water background; each
// pixel is its class template plus iid Gaussian noise clamped to [0, 1].
// Fully determined by the seed.
SynthScene synth_scene(const SynthSpec& spec);

}  // namespace qednet::data
