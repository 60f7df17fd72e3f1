#pragma once

#include <optional>
#include <string>

#include "qednet/data.hpp"
#include "qednet/tensor.hpp"

// Classical spectral-index baselines with their published threshold
// settings. All maps are per-pixel ratio forms; a pixel whose denominator is
// zero gets value 0 and is counted in `flagged`.
namespace qednet::indices {

enum class IndexKind { Ndvi, Mndwi, Mmri, Mvi, Emvi };

IndexKind parse_index(const std::string& name);  // throws on unknown names
std::string index_name(IndexKind kind);

// Channel positions of the bands the index formulas use, resolved from the
// raster band-name header (case/spacing-insensitive).
struct BandSet {
  int green = -1, red = -1, nir = -1, swir1 = -1, swir2 = -1;

  static BandSet resolve(const std::vector<std::string>& band_names);
};

struct IndexResult {
  Map map;
  std::size_t flagged = 0;  // zero-denominator pixels forced to 0
};

IndexResult ndvi(const data::Raster& raster);   // (NIR-Red)/(NIR+Red)
IndexResult mndwi(const data::Raster& raster);  // (Green-SWIR1)/(Green+SWIR1)
IndexResult mmri(const data::Raster& raster);   // (|MNDWI|-|NDVI|)/(|MNDWI|+|NDVI|)
IndexResult mvi(const data::Raster& raster);    // (NIR-Green)/(SWIR1-Green)
IndexResult emvi(const data::Raster& raster);   // (Green-SWIR2)/(SWIR1-Green)

IndexResult compute_index(IndexKind kind, const data::Raster& raster);

enum class Direction { Above, Below };

// Strict comparison: a pixel exactly at the threshold classifies as 0.
Mask classify_index(const Map& map, double threshold,
                    Direction direction = Direction::Above);

// Published defaults: NDVI 0.33, MMRI -0.27, MVI 2.6 (all Above). MNDWI and
// EMVI carry no default and require an explicit threshold.
std::optional<double> default_threshold(IndexKind kind);

}  // namespace qednet::indices
