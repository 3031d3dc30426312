#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "sarndwi/error.hpp"
#include "sarndwi/raster.hpp"

namespace sarndwi {

enum class NdwiScale { Signed, Unit };

// Per-pixel NDWI. Zero denominator (green = nir = 0) maps to 0.
template <std::floating_point T>
constexpr T ndwi_value(T green, T nir) noexcept {
  const T denom = green + nir;
  if (denom == T(0)) return T(0);
  return (green - nir) / denom;
}

template <std::floating_point T>
constexpr T signed_to_unit(T v) noexcept { return (v + T(1)) / T(2); }

template <std::floating_point T>
constexpr T unit_to_signed(T u) noexcept { return T(2) * u - T(1); }

template <std::floating_point T>
std::vector<T> compute_ndwi(std::span<const T> green, std::span<const T> nir) {
  if (green.size() != nir.size()) {
    throw DimensionError("green and nir differ in size (" +
                         std::to_string(green.size()) + " vs " +
                         std::to_string(nir.size()) + ")");
  }
  std::vector<T> out(green.size());
  for (std::size_t i = 0; i < green.size(); ++i) {
    const T g = green[i];
    const T n = nir[i];
    if (!(g >= T(0)) || !(n >= T(0))) {
      throw NegativeRadianceError("negative or non-finite reflectance at pixel " +
                                  std::to_string(i));
    }
    out[i] = ndwi_value(g, n);
  }
  return out;
}

// A single-band NDWI field tagged with its value scale.
struct NdwiMap {
  int height = 0;
  int width = 0;
  NdwiScale scale = NdwiScale::Signed;
  std::vector<float> values;

  Raster to_raster() const { return Raster(height, width, 1, values); }
};

// green and nir are single-channel rasters of equal size.
NdwiMap compute_ndwi(const Raster& green, const Raster& nir);
NdwiMap rescale_to_unit(const NdwiMap& m);
NdwiMap rescale_to_signed(const NdwiMap& m);

// Wraps a single-channel raster holding unit-scale NDWI.
NdwiMap unit_ndwi_from_raster(const Raster& raster);

}  // namespace sarndwi
