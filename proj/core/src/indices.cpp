#include "qednet/indices.hpp"

#include <cctype>
#include <cmath>

namespace qednet::indices {

namespace {

std::string canon(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == ' ' || ch == '_' || ch == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

int find_band(const std::vector<std::string>& names, const std::string& want) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (canon(names[i]) == want) return static_cast<int>(i);
  }
  throw std::invalid_argument("band '" + want + "' not found in raster header");
}

// Guarded ratio: num/den, or 0 with a flag when den == 0.
double ratio(double num, double den, std::size_t& flagged) {
  if (den == 0.0) {
    ++flagged;
    return 0.0;
  }
  return num / den;
}

template <typename PixelFn>
IndexResult per_pixel(const data::Raster& r, PixelFn&& fn) {
  IndexResult out;
  out.map = Map(r.height, r.width);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      out.map.at(y, x) = fn(y, x, out.flagged);
    }
  }
  return out;
}

}  // namespace

IndexKind parse_index(const std::string& name) {
  const std::string c = canon(name);
  if (c == "ndvi") return IndexKind::Ndvi;
  if (c == "mndwi") return IndexKind::Mndwi;
  if (c == "mmri") return IndexKind::Mmri;
  if (c == "mvi") return IndexKind::Mvi;
  if (c == "emvi") return IndexKind::Emvi;
  throw std::invalid_argument("unknown index: " + name);
}

std::string index_name(IndexKind kind) {
  switch (kind) {
    case IndexKind::Ndvi:
      return "ndvi";
    case IndexKind::Mndwi:
      return "mndwi";
    case IndexKind::Mmri:
      return "mmri";
    case IndexKind::Mvi:
      return "mvi";
    case IndexKind::Emvi:
      return "emvi";
  }
  return "ndvi";
}

BandSet BandSet::resolve(const std::vector<std::string>& band_names) {
  BandSet b;
  b.green = find_band(band_names, "green");
  b.red = find_band(band_names, "red");
  b.nir = find_band(band_names, "nir");
  b.swir1 = find_band(band_names, "swir1");
  b.swir2 = find_band(band_names, "swir2");
  return b;
}

IndexResult ndvi(const data::Raster& r) {
  const BandSet b = BandSet::resolve(r.band_names);
  return per_pixel(r, [&](int y, int x, std::size_t& flagged) {
    const double nir = r.at(y, x, b.nir), red = r.at(y, x, b.red);
    return ratio(nir - red, nir + red, flagged);
  });
}

IndexResult mndwi(const data::Raster& r) {
  const BandSet b = BandSet::resolve(r.band_names);
  return per_pixel(r, [&](int y, int x, std::size_t& flagged) {
    const double green = r.at(y, x, b.green), swir1 = r.at(y, x, b.swir1);
    return ratio(green - swir1, green + swir1, flagged);
  });
}

IndexResult mmri(const data::Raster& r) {
  const BandSet b = BandSet::resolve(r.band_names);
  return per_pixel(r, [&](int y, int x, std::size_t& flagged) {
    const double nir = r.at(y, x, b.nir), red = r.at(y, x, b.red);
    const double green = r.at(y, x, b.green), swir1 = r.at(y, x, b.swir1);
    // A pixel counts as flagged once, whichever of the three divisions
    // was guarded.
    std::size_t local = 0;
    const double vi = std::fabs(ratio(nir - red, nir + red, local));
    const double wi = std::fabs(ratio(green - swir1, green + swir1, local));
    const double out = ratio(wi - vi, wi + vi, local);
    if (local > 0) ++flagged;
    return out;
  });
}

IndexResult mvi(const data::Raster& r) {
  const BandSet b = BandSet::resolve(r.band_names);
  return per_pixel(r, [&](int y, int x, std::size_t& flagged) {
    const double nir = r.at(y, x, b.nir), green = r.at(y, x, b.green);
    const double swir1 = r.at(y, x, b.swir1);
    return ratio(nir - green, swir1 - green, flagged);
  });
}

IndexResult emvi(const data::Raster& r) {
  const BandSet b = BandSet::resolve(r.band_names);
  return per_pixel(r, [&](int y, int x, std::size_t& flagged) {
    const double green = r.at(y, x, b.green), swir1 = r.at(y, x, b.swir1);
    const double swir2 = r.at(y, x, b.swir2);
    return ratio(green - swir2, swir1 - green, flagged);
  });
}

IndexResult compute_index(IndexKind kind, const data::Raster& r) {
  switch (kind) {
    case IndexKind::Ndvi:
      return ndvi(r);
    case IndexKind::Mndwi:
      return mndwi(r);
    case IndexKind::Mmri:
      return mmri(r);
    case IndexKind::Mvi:
      return mvi(r);
    case IndexKind::Emvi:
      return emvi(r);
  }
  return ndvi(r);
}

Mask classify_index(const Map& map, double threshold, Direction direction) {
  require(std::isfinite(threshold), "threshold must be finite");
  Mask out(map.h, map.w);
  for (std::size_t i = 0; i < map.v.size(); ++i) {
    const bool hit = direction == Direction::Above ? map.v[i] > threshold
                                                   : map.v[i] < threshold;
    out.v[i] = hit ? 1 : 0;
  }
  return out;
}

std::optional<double> default_threshold(IndexKind kind) {
  switch (kind) {
    case IndexKind::Ndvi:
      return 0.33;
    case IndexKind::Mmri:
      return -0.27;
    case IndexKind::Mvi:
      return 2.6;
    case IndexKind::Mndwi:
    case IndexKind::Emvi:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace qednet::indices
