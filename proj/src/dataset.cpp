#include "sarndwi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "byte_io.hpp"
#include "json_io.hpp"
#include "sarndwi/error.hpp"
#include "sarndwi/indices.hpp"
#include "sarndwi/rng.hpp"

namespace sarndwi {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Scenes

namespace {

void require_size(const Raster& r, int channels, const std::string& what,
                  const std::string& scene_id) {
  if (r.height() != kSceneSize || r.width() != kSceneSize ||
      r.channels() != channels) {
    throw DimensionError("scene " + scene_id + ": " + what + " is " +
                         std::to_string(r.height()) + "x" +
                         std::to_string(r.width()) + "x" +
                         std::to_string(r.channels()) + ", expected 512x512x" +
                         std::to_string(channels));
  }
}

}  // namespace

void validate_scene(const Scene& scene) {
  require_size(scene.s1, 2, "s1", scene.scene_id);
  require_size(scene.cloud_mask, 1, "cloud mask", scene.scene_id);
  for (const char* band : {"green", "nir"}) {
    if (!scene.s2_bands.contains(band)) {
      throw ConfigError("scene " + scene.scene_id + ": missing s2 band " + band);
    }
  }
  for (const auto& [name, raster] : scene.s2_bands) {
    require_size(raster, 1, "s2 band " + name, scene.scene_id);
  }
  for (float v : scene.cloud_mask.values()) {
    if (v != 0.0f && v != 1.0f) {
      throw DomainError("scene " + scene.scene_id +
                        ": cloud mask values must be 0 or 1");
    }
  }
}

Scene load_scene(const fs::path& dir, const BandMap& bands) {
  Scene scene;
  scene.scene_id = dir.filename().string();
  scene.event_id = "unknown";
  if (const fs::path meta = dir / "scene.json"; fs::exists(meta)) {
    std::ifstream in(meta);
    try {
      const auto j = nlohmann::json::parse(in);
      read_optional(j, "event_id", scene.event_id);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(meta.string() + ": " + e.what());
    }
  }
  auto band = [&](const std::string& stem) {
    const fs::path p = dir / (stem + ".cbch");
    if (!fs::exists(p)) {
      throw IoError("scene " + scene.scene_id + ": missing band file " +
                    p.string());
    }
    return read_chip(p);
  };
  const Raster vv = band(bands.vv);
  const Raster vh = band(bands.vh);
  require_size(vv, 1, "VV", scene.scene_id);
  require_size(vh, 1, "VH", scene.scene_id);
  const Raster s1_bands[] = {vv, vh};
  scene.s1 = stack_channels(s1_bands);
  scene.s2_bands["green"] = band(bands.green);
  scene.s2_bands["nir"] = band(bands.nir);
  scene.cloud_mask = band(bands.cloud);
  validate_scene(scene);
  return scene;
}

void save_scene(const fs::path& dir, const Scene& scene, const BandMap& bands) {
  validate_scene(scene);
  fs::create_directories(dir);
  write_chip(dir / (bands.vv + ".cbch"), scene.s1.channel(0));
  write_chip(dir / (bands.vh + ".cbch"), scene.s1.channel(1));
  write_chip(dir / (bands.green + ".cbch"), scene.s2_bands.at("green"));
  write_chip(dir / (bands.nir + ".cbch"), scene.s2_bands.at("nir"));
  write_chip(dir / (bands.cloud + ".cbch"), scene.cloud_mask);
  std::ofstream meta(dir / "scene.json");
  meta << nlohmann::json{{"scene_id", scene.scene_id},
                         {"event_id", scene.event_id}}.dump(2)
       << "\n";
}

// ---------------------------------------------------------------------------
// Chipping

std::vector<SceneTile> chip_scene(const Scene& scene) {
  validate_scene(scene);
  const Raster optical_bands[] = {scene.s2_bands.at("green"),
                                  scene.s2_bands.at("nir")};
  const Raster optical = stack_channels(optical_bands);
  std::vector<SceneTile> tiles;
  tiles.reserve(kChipGrid * kChipGrid);
  for (int row = 0; row < kChipGrid; ++row) {
    for (int col = 0; col < kChipGrid; ++col) {
      SceneTile t;
      t.grid_row = row;
      t.grid_col = col;
      const int y0 = row * kChipSize;
      const int x0 = col * kChipSize;
      t.radar = scene.s1.crop(y0, x0, kChipSize, kChipSize);
      t.optical = optical.crop(y0, x0, kChipSize, kChipSize);
      t.cloud = scene.cloud_mask.crop(y0, x0, kChipSize, kChipSize);
      double cloudy = 0.0;
      for (float v : t.cloud.values()) cloudy += v;
      t.cloud_fraction = cloudy / static_cast<double>(t.cloud.size());
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

Raster assemble_tiles(std::span<const Raster> tiles, int grid) {
  if (grid < 1 || tiles.size() != static_cast<std::size_t>(grid) * grid) {
    throw DimensionError("expected " + std::to_string(grid * grid) +
                         " tiles, got " + std::to_string(tiles.size()));
  }
  const int th = tiles[0].height();
  const int tw = tiles[0].width();
  Raster out(th * grid, tw * grid, tiles[0].channels());
  for (int row = 0; row < grid; ++row) {
    for (int col = 0; col < grid; ++col) {
      const Raster& t = tiles[static_cast<std::size_t>(row) * grid + col];
      if (t.height() != th || t.width() != tw) {
        throw DimensionError("tiles differ in size");
      }
      out.paste(t, row * th, col * tw);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

std::vector<float> normalize_values(std::span<const float> raw,
                                    NormalizationMode mode,
                                    std::optional<ValueRange> range) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) {
      throw NonFiniteError("non-finite input value at index " + std::to_string(i));
    }
  }
  std::vector<float> out(raw.size());
  if (raw.empty()) return out;
  double lo;
  double hi;
  if (mode == NormalizationMode::PerChipMinMax) {
    const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
    lo = *mn;
    hi = *mx;
  } else {
    if (!range) {
      throw ConfigError("global normalization needs a dataset-wide range");
    }
    lo = range->min;
    hi = range->max;
  }
  if (!(hi > lo)) {
    std::fill(out.begin(), out.end(), 0.5f);
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = (static_cast<double>(raw[i]) - lo) / span;
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

Raster normalize_chip(const Raster& raw, NormalizationMode mode,
                      std::span<const ValueRange> ranges) {
  if (mode == NormalizationMode::GlobalMinMax &&
      ranges.size() != static_cast<std::size_t>(raw.channels())) {
    throw ConfigError("global normalization needs one range per channel");
  }
  Raster out(raw.height(), raw.width(), raw.channels());
  for (int c = 0; c < raw.channels(); ++c) {
    const Raster band = raw.channel(c);
    std::optional<ValueRange> range;
    if (mode == NormalizationMode::GlobalMinMax) range = ranges[c];
    const auto norm = normalize_values(band.values(), mode, range);
    for (int y = 0; y < raw.height(); ++y) {
      for (int x = 0; x < raw.width(); ++x) {
        out.at(y, x, c) = norm[static_cast<std::size_t>(y) * raw.width() + x];
      }
    }
  }
  return out;
}

std::string normalization_mode_name(NormalizationMode mode) {
  return mode == NormalizationMode::PerChipMinMax ? "per_chip_minmax"
                                                  : "global_minmax";
}

NormalizationMode parse_normalization_mode(const std::string& name) {
  if (name == "per_chip_minmax") return NormalizationMode::PerChipMinMax;
  if (name == "global_minmax") return NormalizationMode::GlobalMinMax;
  throw ConfigError("unknown normalization_mode '" + name + "'");
}

std::string split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Excluded: return "excluded";
  }
  return "excluded";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  if (name == "excluded") return Split::Excluded;
  throw ConfigError("unknown split '" + name + "'");
}

std::string split_unit_name(SplitUnit unit) {
  return unit == SplitUnit::Scene ? "scene" : "chip";
}

SplitUnit parse_split_unit(const std::string& name) {
  if (name == "scene") return SplitUnit::Scene;
  if (name == "chip") return SplitUnit::Chip;
  throw ConfigError("unknown split unit '" + name + "'");
}

std::string make_chip_id(const std::string& scene_id, int grid_row, int grid_col) {
  return scene_id + "_r" + std::to_string(grid_row) + "c" + std::to_string(grid_col);
}

// ---------------------------------------------------------------------------
// Manifest

std::size_t DatasetManifest::count(Split split) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(),
      [split](const ChipRecord& r) { return r.split == split; }));
}

std::string DatasetManifest::checksum() const {
  const std::string canonical = nlohmann::json(records).dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  nlohmann::json j = {
      {"format_version", 1},
      {"records", m.records},
      {"split_seed", m.split_seed},
      {"cloud_threshold", m.cloud_threshold},
      {"normalization_mode", normalization_mode_name(m.normalization_mode)},
      {"split_unit", split_unit_name(m.split_unit)},
      {"train_fraction", m.train_fraction},
      {"band_map", m.band_map},
      {"global_ranges", m.global_ranges},
      {"checksum", m.checksum()},
  };
  const std::string text = j.dump(1) + "\n";
  detail::write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("manifest not found: " + path.string());
  }
  std::ifstream in(path);
  DatasetManifest m;
  std::string stored;
  try {
    const auto j = nlohmann::json::parse(in);
    j.at("records").get_to(m.records);
    j.at("split_seed").get_to(m.split_seed);
    j.at("cloud_threshold").get_to(m.cloud_threshold);
    m.normalization_mode =
        parse_normalization_mode(j.at("normalization_mode").get<std::string>());
    m.split_unit = parse_split_unit(j.at("split_unit").get<std::string>());
    read_optional(j, "train_fraction", m.train_fraction);
    read_optional(j, "band_map", m.band_map);
    read_optional(j, "global_ranges", m.global_ranges);
    j.at("checksum").get_to(stored);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  if (stored != m.checksum()) {
    throw FormatError("manifest " + path.string() +
                      ": record checksum mismatch (stored " + stored +
                      ", computed " + m.checksum() + ")");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Filtering and splitting

std::size_t filter_clouds(std::vector<ChipRecord>& records, double threshold) {
  std::size_t retained = 0;
  for (ChipRecord& r : records) {
    if (r.cloud_fraction > threshold) {
      r.split = Split::Excluded;
    } else {
      r.split = Split::Train;
      ++retained;
    }
  }
  return retained;
}

void assign_splits(DatasetManifest& manifest, std::uint64_t seed,
                   double train_fraction, SplitUnit unit) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> retained;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.records[i].split != Split::Excluded) retained.push_back(i);
  }
  if (retained.empty()) {
    throw EmptyDatasetError("no cloud-free chips to split");
  }
  manifest.split_seed = seed;
  manifest.train_fraction = train_fraction;
  manifest.split_unit = unit;

  const auto target = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(retained.size())));
  Rng rng(seed);

  if (unit == SplitUnit::Chip) {
    rng.shuffle(std::span(retained));
    for (std::size_t k = 0; k < retained.size(); ++k) {
      manifest.records[retained[k]].split = k < target ? Split::Train : Split::Test;
    }
    return;
  }

  // Group by parent scene, in order of first appearance.
  std::vector<std::string> scene_order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i : retained) {
    const auto& id = manifest.records[i].parent_scene_id;
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) scene_order.push_back(id);
    it->second.push_back(i);
  }
  rng.shuffle(std::span(scene_order));
  std::size_t train = 0;
  for (const auto& id : scene_order) {
    const auto& members = groups[id];
    const bool to_train = train + members.size() <= target;
    if (to_train) train += members.size();
    for (std::size_t i : members) {
      manifest.records[i].split = to_train ? Split::Train : Split::Test;
    }
  }
}

std::vector<std::string> chip_ids_for_split(const DatasetManifest& manifest,
                                            Split split) {
  std::vector<std::string> ids;
  for (const auto& r : manifest.records) {
    if (r.split == split) ids.push_back(r.chip_id);
  }
  return ids;
}

fs::path radar_chip_path(const fs::path& chip_dir, const std::string& chip_id) {
  return chip_dir / (chip_id + ".s1.cbch");
}

fs::path ndwi_chip_path(const fs::path& chip_dir, const std::string& chip_id) {
  return chip_dir / (chip_id + ".ndwi.cbch");
}

// ---------------------------------------------------------------------------
// Batching

Tensor<float> stack_rasters(std::span<const Raster> rasters) {
  if (rasters.empty()) return {};
  const Raster& first = rasters.front();
  Tensor<float> t(static_cast<int>(rasters.size()), first.height(), first.width(),
                  first.channels());
  for (std::size_t i = 0; i < rasters.size(); ++i) {
    const Raster& r = rasters[i];
    if (r.height() != first.height() || r.width() != first.width() ||
        r.channels() != first.channels()) {
      throw ShapeError("batch members differ in shape");
    }
    std::copy(r.values().begin(), r.values().end(), t.image(static_cast<int>(i)));
  }
  return t;
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n,
                                     std::optional<std::uint64_t> seed,
                                     std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (seed) {
    // splitmix-style mixing keeps per-epoch streams unrelated.
    std::uint64_t key = *seed + 0x9E3779B97F4A7C15ULL * (epoch + 1);
    key = (key ^ (key >> 30)) * 0xBF58476D1CE4E5B9ULL;
    key = (key ^ (key >> 27)) * 0x94D049BB133111EBULL;
    key ^= key >> 31;
    Rng rng(key);
    rng.shuffle(std::span(order));
  }
  return order;
}

}  // namespace

ChipBatchStream::ChipBatchStream(std::vector<std::string> chip_ids,
                                 fs::path chip_dir, int batch_size,
                                 std::optional<std::uint64_t> shuffle_seed)
    : ids_(std::move(chip_ids)), chip_dir_(std::move(chip_dir)),
      batch_size_(batch_size), seed_(shuffle_seed) {
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  for (const auto& id : ids_) {
    if (!fs::exists(radar_chip_path(chip_dir_, id)) ||
        !fs::exists(ndwi_chip_path(chip_dir_, id))) {
      throw MissingChipError("chip " + id + " has no files under " +
                             chip_dir_.string());
    }
  }
  start_epoch(0);
}

void ChipBatchStream::start_epoch(std::uint64_t epoch) {
  order_ = epoch_order(ids_.size(), seed_, epoch);
  cursor_ = 0;
}

std::optional<Batch> ChipBatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end =
      std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
  std::vector<Raster> inputs;
  std::vector<Raster> targets;
  Batch batch;
  for (std::size_t k = cursor_; k < end; ++k) {
    const std::string& id = ids_[order_[k]];
    Raster in;
    Raster target;
    try {
      in = read_chip(radar_chip_path(chip_dir_, id));
      target = read_chip(ndwi_chip_path(chip_dir_, id));
    } catch (const IoError&) {
      throw MissingChipError("chip " + id + " could not be read from " +
                             chip_dir_.string());
    }
    if (in.channels() != 2 || target.channels() != 1 ||
        in.height() != target.height() || in.width() != target.width()) {
      throw ShapeError("chip " + id + " has mismatched radar/NDWI shapes");
    }
    inputs.push_back(std::move(in));
    targets.push_back(std::move(target));
    batch.chip_ids.push_back(id);
  }
  cursor_ = end;
  batch.inputs = stack_rasters(inputs);
  batch.targets = stack_rasters(targets);
  return batch;
}

std::unique_ptr<ChipBatchStream> iterate_batches(
    const DatasetManifest& manifest, Split split, const fs::path& chip_dir,
    int batch_size, std::optional<std::uint64_t> shuffle_seed) {
  return std::make_unique<ChipBatchStream>(chip_ids_for_split(manifest, split),
                                           chip_dir, batch_size, shuffle_seed);
}

InMemoryBatchSource::InMemoryBatchSource(std::vector<Raster> inputs,
                                         std::vector<Raster> targets,
                                         int batch_size,
                                         std::optional<std::uint64_t> shuffle_seed)
    : inputs_(std::move(inputs)), targets_(std::move(targets)),
      batch_size_(batch_size), seed_(shuffle_seed) {
  if (inputs_.size() != targets_.size()) {
    throw DimensionError("inputs and targets differ in count");
  }
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  start_epoch(0);
}

void InMemoryBatchSource::start_epoch(std::uint64_t epoch) {
  order_ = epoch_order(inputs_.size(), seed_, epoch);
  cursor_ = 0;
}

std::optional<Batch> InMemoryBatchSource::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end =
      std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
  std::vector<Raster> in;
  std::vector<Raster> tg;
  Batch batch;
  for (std::size_t k = cursor_; k < end; ++k) {
    in.push_back(inputs_[order_[k]]);
    tg.push_back(targets_[order_[k]]);
    batch.chip_ids.push_back("mem" + std::to_string(order_[k]));
  }
  cursor_ = end;
  batch.inputs = stack_rasters(in);
  batch.targets = stack_rasters(tg);
  return batch;
}

}  // namespace sarndwi
