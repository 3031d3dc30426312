#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "sarndwi/dataset.hpp"
#include "sarndwi/indices.hpp"
#include "sarndwi/raster.hpp"
#include "sarndwi/synthetic.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sarndwi_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline sarndwi::Raster random_raster(int h, int w, int c, std::mt19937_64& gen,
                                     float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  sarndwi::Raster r(h, w, c);
  for (float& v : r.storage()) v = dist(gen);
  return r;
}

// First `count` cloud-free chip pairs (normalized radar, unit NDWI) from a
// synthetic scene.
inline void synthetic_pairs(int count, std::vector<sarndwi::Raster>& inputs,
                            std::vector<sarndwi::Raster>& targets,
                            int scene_index = 0) {
  sarndwi::SyntheticOptions opts;
  opts.cloudy_share = 0.0;
  const auto tiles = sarndwi::chip_scene(sarndwi::synthetic_scene(scene_index, opts));
  for (int i = 0; i < count; ++i) {
    inputs.push_back(sarndwi::normalize_chip(tiles[i].radar,
                                             sarndwi::NormalizationMode::PerChipMinMax));
    targets.push_back(sarndwi::rescale_to_unit(
                          sarndwi::compute_ndwi(tiles[i].optical.channel(0),
                                                tiles[i].optical.channel(1)))
                          .to_raster());
  }
}

}  // namespace testing_support
