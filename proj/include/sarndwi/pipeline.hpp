#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sarndwi/dataset.hpp"
#include "sarndwi/metrics.hpp"
#include "sarndwi/model.hpp"
#include "sarndwi/otsu.hpp"
#include "sarndwi/training.hpp"

namespace sarndwi {

inline constexpr int kReportFormatVersion = 1;

struct PipelinePaths {
  std::filesystem::path scene_dir = "scenes";
  std::filesystem::path chip_dir = "chips";
  std::filesystem::path manifest = "chips/manifest.json";
  std::filesystem::path weights = "model/weights.cbwt";
  std::filesystem::path reports = "reports";
};

struct DatasetOptions {
  double cloud_threshold = 0.0;
  NormalizationMode normalization_mode = NormalizationMode::PerChipMinMax;
  SplitUnit split_unit = SplitUnit::Scene;
  std::uint64_t split_seed = 42;
  double train_fraction = 0.8;
  BandMap band_map;
};

struct PipelineConfig {
  PipelinePaths paths;
  DatasetOptions dataset;
  UNetConfig model;
  TrainConfig train;
  int histogram_bins = kDefaultHistogramBins;
};

// JSON text round trip. Unknown keys are rejected so typos surface.
std::string config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Sets one dotted key ("train.max_epochs", "paths.chip_dir") from text. The
// value is parsed as JSON when possible, otherwise taken as a string.
void apply_override(PipelineConfig& config, const std::string& key,
                    const std::string& value);

// JSON text of one dotted key; ConfigError if the key does not exist.
std::string config_value(const PipelineConfig& config, const std::string& key);

// Writes effective_config.json into `dir`.
void echo_config(const std::filesystem::path& dir, const PipelineConfig& config);

// Chips every scene under paths.scene_dir, writes the retained chips
// (<id>.s1.cbch normalized radar, <id>.ndwi.cbch unit-scale NDWI), applies
// cloud filtering and the split, and writes the manifest. Returns a JSON
// summary with the chip counts and manifest checksum.
std::string run_preprocess(const PipelineConfig& config);

// Trains from the manifest's train split, holding out validation_fraction
// of it; saves the best-validation weights and reports/train_report.json.
std::string run_train(const PipelineConfig& config);

struct EvaluationOutput {
  std::string json;
  std::string table;
};
EvaluationOutput run_evaluate(const PipelineConfig& config, Split split);

// Text table in the layout: Metric | Accuracy | AUC | R2 Score | Mean IoU.
std::string format_metrics_table(const std::string& row_label,
                                 const MetricsReport& report);
std::string metrics_report_json(const MetricsReport& report,
                                const std::string& split);

// One unit-scale NDWI chip per input radar chip; optional 8-bit PGM export.
std::string run_predict(const PipelineConfig& config,
                        const std::vector<std::filesystem::path>& inputs,
                        const std::filesystem::path& output_dir, bool export_pgm);

// Quantizes [0, 1] to floor(255 v + 0.5) and writes a binary PGM.
void write_pgm(const std::filesystem::path& path, const NdwiMap& map);
std::uint8_t quantize_unit(float v) noexcept;

struct OtsuFileResult {
  OtsuResult result;
  std::size_t water_pixels = 0;
  std::size_t pixel_count = 0;
};
// Single-channel chip in, {0, 1} mask chip out.
OtsuFileResult run_otsu(const std::filesystem::path& input,
                        const std::filesystem::path& output_mask, int bins);

}  // namespace sarndwi
