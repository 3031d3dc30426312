#include "sarndwi/indices.hpp"

namespace sarndwi {

NdwiMap compute_ndwi(const Raster& green, const Raster& nir) {
  if (green.channels() != 1 || nir.channels() != 1 ||
      green.height() != nir.height() || green.width() != nir.width()) {
    throw DimensionError("green and nir must be single-band rasters of equal size");
  }
  NdwiMap m;
  m.height = green.height();
  m.width = green.width();
  m.scale = NdwiScale::Signed;
  m.values = compute_ndwi<float>(green.values(), nir.values());
  return m;
}

NdwiMap rescale_to_unit(const NdwiMap& m) {
  if (m.scale != NdwiScale::Signed) {
    throw ScaleError("NDWI map is already unit scale");
  }
  NdwiMap out = m;
  out.scale = NdwiScale::Unit;
  for (float& v : out.values) v = signed_to_unit(v);
  return out;
}

NdwiMap rescale_to_signed(const NdwiMap& m) {
  if (m.scale != NdwiScale::Unit) {
    throw ScaleError("NDWI map is already signed scale");
  }
  NdwiMap out = m;
  out.scale = NdwiScale::Signed;
  for (float& v : out.values) v = unit_to_signed(v);
  return out;
}

NdwiMap unit_ndwi_from_raster(const Raster& raster) {
  if (raster.channels() != 1) {
    throw DimensionError("NDWI raster must have exactly one channel, got " +
                         std::to_string(raster.channels()));
  }
  NdwiMap m;
  m.height = raster.height();
  m.width = raster.width();
  m.scale = NdwiScale::Unit;
  m.values.assign(raster.values().begin(), raster.values().end());
  return m;
}

}  // namespace sarndwi
