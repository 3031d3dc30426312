#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarndwi/raster.hpp"
#include "sarndwi/tensor.hpp"

namespace sarndwi {

inline constexpr int kSceneSize = 512;
inline constexpr int kChipSize = 128;
inline constexpr int kChipGrid = kSceneSize / kChipSize;  // 4 x 4 tiles

// Maps logical bands onto the per-band file stems inside a scene directory.
// Sentinel-2 green/NIR default to B03/B08.
struct BandMap {
  std::string vv = "VV";
  std::string vh = "VH";
  std::string green = "B03";
  std::string nir = "B08";
  std::string cloud = "cloud";

  bool operator==(const BandMap&) const = default;
};

// One paired Sentinel-1/Sentinel-2 scene at 512 x 512.
struct Scene {
  std::string scene_id;
  std::string event_id;
  Raster s1;                              // 2 channels: VV, VH (sensor units)
  std::map<std::string, Raster> s2_bands; // single-channel; needs green, nir
  Raster cloud_mask;                      // single channel, values in {0, 1}
};

// Throws DimensionError for wrong raster sizes, DomainError for non-binary
// cloud masks, ConfigError for missing green/nir bands.
void validate_scene(const Scene& scene);

// Scene directory: one chip file per band named <stem>.cbch (stems from the
// band map) and an optional scene.json carrying "event_id". The directory
// name is the scene id.
Scene load_scene(const std::filesystem::path& dir, const BandMap& bands);
void save_scene(const std::filesystem::path& dir, const Scene& scene,
                const BandMap& bands);

struct SceneTile {
  int grid_row = 0;
  int grid_col = 0;
  Raster radar;    // 128x128x2 raw VV, VH
  Raster optical;  // 128x128x2 raw green, nir
  Raster cloud;    // 128x128x1
  double cloud_fraction = 0.0;
};

// 16 non-overlapping tiles in row-major grid order.
std::vector<SceneTile> chip_scene(const Scene& scene);

// Inverse of tiling: tiles in row-major order over a grid x grid layout.
Raster assemble_tiles(std::span<const Raster> tiles, int grid = kChipGrid);

enum class NormalizationMode { PerChipMinMax, GlobalMinMax };

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const ValueRange&) const = default;
};

// Maps values to [0, 1] by min-max. Per-chip mode uses the values' own
// range; global mode uses `range` and clamps. A degenerate range yields 0.5.
std::vector<float> normalize_values(std::span<const float> raw,
                                    NormalizationMode mode,
                                    std::optional<ValueRange> range = {});
// Channel-wise; global mode needs one range per channel.
Raster normalize_chip(const Raster& raw, NormalizationMode mode,
                      std::span<const ValueRange> ranges = {});

std::string normalization_mode_name(NormalizationMode mode);
NormalizationMode parse_normalization_mode(const std::string& name);

enum class Split { Train, Test, Excluded };
std::string split_name(Split split);
Split parse_split(const std::string& name);

enum class SplitUnit { Scene, Chip };
std::string split_unit_name(SplitUnit unit);
SplitUnit parse_split_unit(const std::string& name);

struct ChipRecord {
  std::string chip_id;
  std::string parent_scene_id;
  std::string event_id;
  int grid_row = 0;
  int grid_col = 0;
  double cloud_fraction = 0.0;
  // Retained records carry Train until assign_splits runs.
  Split split = Split::Train;

  bool operator==(const ChipRecord&) const = default;
};

std::string make_chip_id(const std::string& scene_id, int grid_row, int grid_col);

struct DatasetManifest {
  std::vector<ChipRecord> records;
  std::uint64_t split_seed = 0;
  double cloud_threshold = 0.0;
  NormalizationMode normalization_mode = NormalizationMode::PerChipMinMax;
  SplitUnit split_unit = SplitUnit::Scene;
  double train_fraction = 0.8;
  BandMap band_map;
  // Per-channel (VV, VH) range, only for global normalization.
  std::vector<ValueRange> global_ranges;

  std::size_t count(Split split) const noexcept;
  // FNV-1a 64 over the canonical JSON of the record list, as 16 hex digits.
  std::string checksum() const;
};

void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest);
// Throws FormatError if the stored checksum does not match the records.
DatasetManifest read_manifest(const std::filesystem::path& path);

// Marks records with cloud_fraction > threshold as excluded and the rest as
// retained. Returns the retained count.
std::size_t filter_clouds(std::vector<ChipRecord>& records, double threshold);

// Deterministic train/test assignment of the retained records. Chip unit:
// floor(train_fraction * n) chips go to train. Scene unit: whole scenes are
// taken in shuffled order while they fit under that target.
void assign_splits(DatasetManifest& manifest, std::uint64_t seed,
                   double train_fraction = 0.8, SplitUnit unit = SplitUnit::Scene);

std::vector<std::string> chip_ids_for_split(const DatasetManifest& manifest,
                                            Split split);

std::filesystem::path radar_chip_path(const std::filesystem::path& chip_dir,
                                      const std::string& chip_id);
std::filesystem::path ndwi_chip_path(const std::filesystem::path& chip_dir,
                                     const std::string& chip_id);

struct Batch {
  Tensor<float> inputs;   // B x H x W x 2
  Tensor<float> targets;  // B x H x W x 1
  std::vector<std::string> chip_ids;
};

// A replayable, single-consumer source of batches. start_epoch() rewinds;
// the order within an epoch is a pure function of the seed and epoch.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual void start_epoch(std::uint64_t epoch) = 0;
  virtual std::optional<Batch> next() = 0;
  virtual std::size_t size() const = 0;
};

// Streams chips from disk. Every chip file is checked up front;
// MissingChipError names the first chip without its files.
class ChipBatchStream final : public BatchSource {
 public:
  ChipBatchStream(std::vector<std::string> chip_ids,
                  std::filesystem::path chip_dir, int batch_size,
                  std::optional<std::uint64_t> shuffle_seed);

  void start_epoch(std::uint64_t epoch) override;
  std::optional<Batch> next() override;
  std::size_t size() const override { return ids_.size(); }

 private:
  std::vector<std::string> ids_;
  std::vector<std::size_t> order_;
  std::filesystem::path chip_dir_;
  int batch_size_;
  std::optional<std::uint64_t> seed_;
  std::size_t cursor_ = 0;
};

// Convenience over ChipBatchStream for one split of a manifest; starts at
// epoch 0.
std::unique_ptr<ChipBatchStream> iterate_batches(
    const DatasetManifest& manifest, Split split,
    const std::filesystem::path& chip_dir, int batch_size,
    std::optional<std::uint64_t> shuffle_seed);

// Holds (input, target) raster pairs in memory.
class InMemoryBatchSource final : public BatchSource {
 public:
  InMemoryBatchSource(std::vector<Raster> inputs, std::vector<Raster> targets,
                      int batch_size,
                      std::optional<std::uint64_t> shuffle_seed = {});

  void start_epoch(std::uint64_t epoch) override;
  std::optional<Batch> next() override;
  std::size_t size() const override { return inputs_.size(); }

 private:
  std::vector<Raster> inputs_;
  std::vector<Raster> targets_;
  std::vector<std::size_t> order_;
  int batch_size_;
  std::optional<std::uint64_t> seed_;
  std::size_t cursor_ = 0;
};

// Packs equally shaped rasters into a batch tensor; ShapeError otherwise.
Tensor<float> stack_rasters(std::span<const Raster> rasters);

}  // namespace sarndwi
