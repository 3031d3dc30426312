#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sarndwi/dataset.hpp"

namespace sarndwi {

// Procedural paired scenes with known water geometry (a meandering river
// plus elliptical lakes over sinusoidal terrain). Radar backscatter drops
// over water; green/NIR reflectances follow the same water field, so NDWI is
// high exactly where the radar is dark. Cloudy scenes carry opaque cloud
// blobs in the mask and saturate the optical bands under them.
struct SyntheticOptions {
  int scene_count = 4;
  std::uint64_t seed = 1;
  double cloudy_share = 0.25;
  int events = 18;
};

Scene synthetic_scene(int index, const SyntheticOptions& options);

// Writes scene directories scene_0000, scene_0001, ... under `dir`.
std::vector<std::filesystem::path> write_synthetic_scenes(
    const std::filesystem::path& dir, const SyntheticOptions& options,
    const BandMap& bands = {});

// Water fraction field used by synthetic_scene, exposed for tests.
Raster synthetic_water(int index, const SyntheticOptions& options);

}  // namespace sarndwi
