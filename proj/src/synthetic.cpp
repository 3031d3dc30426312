#include "sarndwi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "sarndwi/rng.hpp"

namespace sarndwi {

namespace {

struct Lake {
  double cy, cx, ry, rx;
};

struct Layout {
  bool river = false;
  double river_y = 0, river_amp = 0, river_freq = 0, river_phase = 0, river_width = 0;
  std::vector<Lake> lakes;
  std::vector<Lake> clouds;
  double terrain_fx[3] = {}, terrain_fy[3] = {}, terrain_phase[3] = {};
};

std::uint64_t scene_seed(int index, std::uint64_t seed) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) * 0xD1B54A32D192ED03ULL + 1;
}

Layout make_layout(int index, const SyntheticOptions& o) {
  Rng rng(scene_seed(index, o.seed));
  Layout l;
  l.river = rng.uniform() < 0.7;
  l.river_y = rng.uniform(100, 412);
  l.river_amp = rng.uniform(10, 80);
  l.river_freq = rng.uniform(0.005, 0.02);
  l.river_phase = rng.uniform(0, 2 * std::numbers::pi);
  l.river_width = rng.uniform(8, 30);
  const int lakes = static_cast<int>(rng.below(4));
  for (int i = 0; i < lakes; ++i) {
    l.lakes.push_back({rng.uniform(0, 512), rng.uniform(0, 512),
                       rng.uniform(15, 70), rng.uniform(15, 70)});
  }
  for (int k = 0; k < 3; ++k) {
    l.terrain_fx[k] = rng.uniform(0.005, 0.05);
    l.terrain_fy[k] = rng.uniform(0.005, 0.05);
    l.terrain_phase[k] = rng.uniform(0, 2 * std::numbers::pi);
  }
  if (rng.uniform() < o.cloudy_share) {
    const int blobs = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < blobs; ++i) {
      l.clouds.push_back({rng.uniform(0, 512), rng.uniform(0, 512),
                          rng.uniform(30, 120), rng.uniform(30, 120)});
    }
  }
  return l;
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

double water_at(const Layout& l, int y, int x) {
  double w = 0.0;
  if (l.river) {
    const double center =
        l.river_y + l.river_amp * std::sin(l.river_freq * x + l.river_phase);
    const double dist = std::abs(y - center);
    w = std::max(w, 1.0 - smoothstep(l.river_width * 0.5, l.river_width * 0.5 + 4, dist));
  }
  for (const Lake& k : l.lakes) {
    const double dy = (y - k.cy) / k.ry;
    const double dx = (x - k.cx) / k.rx;
    const double r = std::sqrt(dy * dy + dx * dx);
    w = std::max(w, 1.0 - smoothstep(0.9, 1.0, r));
  }
  return w;
}

double terrain_at(const Layout& l, int y, int x) {
  double t = 0.0;
  for (int k = 0; k < 3; ++k) {
    t += std::sin(l.terrain_fx[k] * x + l.terrain_fy[k] * y + l.terrain_phase[k]);
  }
  return (t / 3.0 + 1.0) / 2.0;
}

bool cloud_at(const Layout& l, int y, int x) {
  for (const Lake& c : l.clouds) {
    const double dy = (y - c.cy) / c.ry;
    const double dx = (x - c.cx) / c.rx;
    if (dy * dy + dx * dx <= 1.0) return true;
  }
  return false;
}

// Deterministic per-pixel texture in [-1, 1].
double texture(std::uint64_t seed, int y, int x) {
  std::uint64_t h = seed ^ (static_cast<std::uint64_t>(y) << 32) ^ static_cast<std::uint64_t>(x);
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  h ^= h >> 31;
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

Raster synthetic_water(int index, const SyntheticOptions& options) {
  const Layout l = make_layout(index, options);
  Raster w(kSceneSize, kSceneSize, 1);
  for (int y = 0; y < kSceneSize; ++y) {
    for (int x = 0; x < kSceneSize; ++x) {
      w.at(y, x) = static_cast<float>(water_at(l, y, x));
    }
  }
  return w;
}

Scene synthetic_scene(int index, const SyntheticOptions& options) {
  const Layout l = make_layout(index, options);
  const std::uint64_t tex_seed = scene_seed(index, options.seed) ^ 0x5bd1e995ULL;
  char id[32];
  std::snprintf(id, sizeof id, "scene_%04d", index);
  Scene s;
  s.scene_id = id;
  s.event_id = "event_" + std::to_string(index % std::max(1, options.events));
  s.s1 = Raster(kSceneSize, kSceneSize, 2);
  Raster green(kSceneSize, kSceneSize, 1);
  Raster nir(kSceneSize, kSceneSize, 1);
  s.cloud_mask = Raster(kSceneSize, kSceneSize, 1);
  for (int y = 0; y < kSceneSize; ++y) {
    for (int x = 0; x < kSceneSize; ++x) {
      const double w = water_at(l, y, x);
      const double t = terrain_at(l, y, x);
      const double n = 0.5 * texture(tex_seed, y, x);
      // Backscatter in dB.
      s.s1.at(y, x, 0) = static_cast<float>(-18.0 * w + (-7.0 + 3.0 * t) * (1 - w) + n);
      s.s1.at(y, x, 1) = static_cast<float>(-25.0 * w + (-14.0 + 4.0 * (1 - t)) * (1 - w) + n);
      double g = 0.06 + 0.04 * w + 0.03 * (1 - t);
      double r = 0.02 + (0.08 + 0.32 * t) * (1 - w);
      if (cloud_at(l, y, x)) {
        s.cloud_mask.at(y, x) = 1.0f;
        g = 0.55;
        r = 0.60;
      }
      green.at(y, x) = static_cast<float>(g);
      nir.at(y, x) = static_cast<float>(r);
    }
  }
  s.s2_bands["green"] = std::move(green);
  s.s2_bands["nir"] = std::move(nir);
  return s;
}

std::vector<std::filesystem::path> write_synthetic_scenes(
    const std::filesystem::path& dir, const SyntheticOptions& options,
    const BandMap& bands) {
  std::vector<std::filesystem::path> out;
  for (int i = 0; i < options.scene_count; ++i) {
    const Scene s = synthetic_scene(i, options);
    const auto path = dir / s.scene_id;
    save_scene(path, s, bands);
    out.push_back(path);
  }
  return out;
}

}  // namespace sarndwi
