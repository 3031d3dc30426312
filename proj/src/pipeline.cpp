#include "sarndwi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "byte_io.hpp"
#include "json_io.hpp"
#include "sarndwi/error.hpp"
#include "sarndwi/evaluation.hpp"
#include "sarndwi/indices.hpp"
#include "sarndwi/rng.hpp"

namespace sarndwi {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

json to_json_value(const PipelineConfig& c) {
  const TrainConfig& t = c.train;
  return {
      {"paths",
       {{"scene_dir", c.paths.scene_dir.string()},
        {"chip_dir", c.paths.chip_dir.string()},
        {"manifest", c.paths.manifest.string()},
        {"weights", c.paths.weights.string()},
        {"reports", c.paths.reports.string()}}},
      {"dataset",
       {{"cloud_threshold", c.dataset.cloud_threshold},
        {"normalization_mode", normalization_mode_name(c.dataset.normalization_mode)},
        {"split_unit", split_unit_name(c.dataset.split_unit)},
        {"split_seed", c.dataset.split_seed},
        {"train_fraction", c.dataset.train_fraction},
        {"band_map", c.dataset.band_map}}},
      {"model", c.model},
      {"train",
       {{"loss", loss_kind_name(t.loss)},
        {"optimizer", "adam"},
        {"learning_rate", t.optimizer.learning_rate},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"epsilon", t.optimizer.epsilon},
        {"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"patience", t.patience},
        {"validation_fraction", t.validation_fraction},
        {"rng_seed", t.rng_seed}}},
      {"metrics", {{"histogram_bins", c.histogram_bins}}},
  };
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end()) {
      throw ConfigError("unknown config key '" + section + (section.empty() ? "" : ".") + key + "'");
    }
  }
}

PipelineConfig from_json_value(const json& j) {
  PipelineConfig c;
  reject_unknown(j, {"paths", "dataset", "model", "train", "metrics"}, "");
  if (auto it = j.find("paths"); it != j.end()) {
    reject_unknown(*it, {"scene_dir", "chip_dir", "manifest", "weights", "reports"}, "paths");
    auto path = [&](const char* key, fs::path& out) {
      if (it->contains(key)) out = it->at(key).get<std::string>();
    };
    path("scene_dir", c.paths.scene_dir);
    path("chip_dir", c.paths.chip_dir);
    path("manifest", c.paths.manifest);
    path("weights", c.paths.weights);
    path("reports", c.paths.reports);
  }
  if (auto it = j.find("dataset"); it != j.end()) {
    reject_unknown(*it, {"cloud_threshold", "normalization_mode", "split_unit",
                         "split_seed", "train_fraction", "band_map"}, "dataset");
    read_optional(*it, "cloud_threshold", c.dataset.cloud_threshold);
    if (it->contains("normalization_mode")) {
      c.dataset.normalization_mode =
          parse_normalization_mode(it->at("normalization_mode").get<std::string>());
    }
    if (it->contains("split_unit")) {
      c.dataset.split_unit = parse_split_unit(it->at("split_unit").get<std::string>());
    }
    read_optional(*it, "split_seed", c.dataset.split_seed);
    read_optional(*it, "train_fraction", c.dataset.train_fraction);
    read_optional(*it, "band_map", c.dataset.band_map);
  }
  if (auto it = j.find("model"); it != j.end()) {
    reject_unknown(*it, {"input_channels", "encoder_filters", "bottleneck_filters",
                         "decoder_filters", "convs_per_block", "kernel", "pool",
                         "upsample", "hidden_activation", "output_activation"},
                   "model");
    it->get_to(c.model);
  }
  if (auto it = j.find("train"); it != j.end()) {
    reject_unknown(*it, {"loss", "optimizer", "learning_rate", "beta1", "beta2",
                         "epsilon", "batch_size", "max_epochs", "patience",
                         "validation_fraction", "rng_seed"}, "train");
    TrainConfig& t = c.train;
    if (it->contains("loss")) t.loss = parse_loss_kind(it->at("loss").get<std::string>());
    if (it->contains("optimizer") && it->at("optimizer") != "adam") {
      throw ConfigError("only the adam optimizer is supported");
    }
    read_optional(*it, "learning_rate", t.optimizer.learning_rate);
    read_optional(*it, "beta1", t.optimizer.beta1);
    read_optional(*it, "beta2", t.optimizer.beta2);
    read_optional(*it, "epsilon", t.optimizer.epsilon);
    read_optional(*it, "batch_size", t.batch_size);
    read_optional(*it, "max_epochs", t.max_epochs);
    read_optional(*it, "patience", t.patience);
    read_optional(*it, "validation_fraction", t.validation_fraction);
    read_optional(*it, "rng_seed", t.rng_seed);
  }
  if (auto it = j.find("metrics"); it != j.end()) {
    reject_unknown(*it, {"histogram_bins"}, "metrics");
    read_optional(*it, "histogram_bins", c.histogram_bins);
  }
  c.model.validate();
  if (c.train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (c.histogram_bins < 2) throw BinCountError("metrics.histogram_bins must be >= 2");
  if (!(c.train.validation_fraction >= 0.0 && c.train.validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction must lie in [0, 1)");
  }
  return c;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) {
  return to_json_value(config).dump(2);
}

PipelineConfig config_from_json(const std::string& text) {
  try {
    return from_json_value(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void apply_override(PipelineConfig& config, const std::string& key,
                    const std::string& value) {
  json j = to_json_value(config);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) throw ConfigError("unknown config key '" + key + "'");
  // Path-like and enum fields stay strings even when they parse as numbers.
  if ((*node)[parts.back()].is_string() && !parsed.is_string()) parsed = value;
  // Changing the encoder list re-derives the decoder list.
  if (parts.size() == 2 && parts[0] == "model" && parts[1] == "encoder_filters") {
    node->erase("decoder_filters");
  }
  (*node)[parts.back()] = parsed;
  try {
    config = from_json_value(j);
  } catch (const json::exception& e) {
    throw ConfigError("invalid value for '" + key + "': " + e.what());
  }
}

std::string config_value(const PipelineConfig& config, const std::string& key) {
  const json j = to_json_value(config);
  const json* node = &j;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
  }
  if (node == &j) throw ConfigError("empty config key");
  return node->dump();
}

void echo_config(const fs::path& dir, const PipelineConfig& config) {
  fs::create_directories(dir);
  std::ofstream out(dir / "effective_config.json");
  out << config_to_json(config) << "\n";
  if (!out) throw IoError("cannot write effective_config.json under " + dir.string());
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  detail::write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

fs::path parent_or_current(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

}  // namespace

// ---------------------------------------------------------------------------
// preprocess

std::string run_preprocess(const PipelineConfig& config) {
  const auto& paths = config.paths;
  const auto& opts = config.dataset;
  std::vector<fs::path> scene_dirs;
  if (fs::is_directory(paths.scene_dir)) {
    for (const auto& entry : fs::directory_iterator(paths.scene_dir)) {
      if (entry.is_directory()) scene_dirs.push_back(entry.path());
    }
  }
  if (scene_dirs.empty()) {
    throw EmptyDatasetError("no scene directories under " + paths.scene_dir.string());
  }
  std::sort(scene_dirs.begin(), scene_dirs.end());

  DatasetManifest manifest;
  manifest.cloud_threshold = opts.cloud_threshold;
  manifest.normalization_mode = opts.normalization_mode;
  manifest.band_map = opts.band_map;

  if (opts.normalization_mode == NormalizationMode::GlobalMinMax) {
    manifest.global_ranges.assign(2, ValueRange{std::numeric_limits<double>::infinity(),
                                                -std::numeric_limits<double>::infinity()});
    for (const auto& dir : scene_dirs) {
      const Scene scene = load_scene(dir, opts.band_map);
      for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < kSceneSize; ++y) {
          for (int x = 0; x < kSceneSize; ++x) {
            const float v = scene.s1.at(y, x, c);
            if (!std::isfinite(v)) {
              throw NonFiniteError("scene " + scene.scene_id + ": non-finite radar value");
            }
            manifest.global_ranges[c].min = std::min<double>(manifest.global_ranges[c].min, v);
            manifest.global_ranges[c].max = std::max<double>(manifest.global_ranges[c].max, v);
          }
        }
      }
    }
  }

  fs::create_directories(paths.chip_dir);
  for (const auto& dir : scene_dirs) {
    const Scene scene = load_scene(dir, opts.band_map);
    for (SceneTile& tile : chip_scene(scene)) {
      ChipRecord rec;
      rec.chip_id = make_chip_id(scene.scene_id, tile.grid_row, tile.grid_col);
      rec.parent_scene_id = scene.scene_id;
      rec.event_id = scene.event_id;
      rec.grid_row = tile.grid_row;
      rec.grid_col = tile.grid_col;
      rec.cloud_fraction = tile.cloud_fraction;
      rec.split = rec.cloud_fraction > opts.cloud_threshold ? Split::Excluded : Split::Train;
      if (rec.split != Split::Excluded) {
        try {
          const Raster radar =
              normalize_chip(tile.radar, opts.normalization_mode, manifest.global_ranges);
          const NdwiMap ndwi =
              rescale_to_unit(compute_ndwi(tile.optical.channel(0), tile.optical.channel(1)));
          write_chip(radar_chip_path(paths.chip_dir, rec.chip_id), radar);
          write_chip(ndwi_chip_path(paths.chip_dir, rec.chip_id), ndwi.to_raster());
        } catch (const Error& e) {
          throw Error(e.code(), "chip " + rec.chip_id + ": " + e.what());
        }
      }
      manifest.records.push_back(std::move(rec));
    }
  }

  const std::size_t retained = filter_clouds(manifest.records, opts.cloud_threshold);
  assign_splits(manifest, opts.split_seed, opts.train_fraction, opts.split_unit);
  write_manifest(paths.manifest, manifest);
  echo_config(parent_or_current(paths.manifest), config);

  const json summary = {
      {"format_version", kReportFormatVersion},
      {"command", "preprocess"},
      {"scenes", scene_dirs.size()},
      {"total_chips", manifest.records.size()},
      {"excluded", manifest.records.size() - retained},
      {"retained", retained},
      {"train", manifest.count(Split::Train)},
      {"test", manifest.count(Split::Test)},
      {"manifest", paths.manifest.string()},
      {"manifest_checksum", manifest.checksum()},
  };
  return summary.dump(2);
}

// ---------------------------------------------------------------------------
// train

std::string run_train(const PipelineConfig& config) {
  const DatasetManifest manifest = read_manifest(config.paths.manifest);
  std::vector<std::string> train_ids = chip_ids_for_split(manifest, Split::Train);
  if (train_ids.empty()) throw EmptyDatasetError("manifest has no training chips");

  // Hold out a deterministic validation subset of the train split.
  Rng rng(config.train.rng_seed ^ 0xA5A5A5A5ULL);
  rng.shuffle(std::span(train_ids));
  auto val_count = static_cast<std::size_t>(
      std::floor(config.train.validation_fraction * static_cast<double>(train_ids.size())));
  if (config.train.validation_fraction > 0.0 && val_count == 0 && train_ids.size() > 1) {
    val_count = 1;
  }
  std::vector<std::string> val_ids(train_ids.end() - static_cast<std::ptrdiff_t>(val_count),
                                   train_ids.end());
  train_ids.resize(train_ids.size() - val_count);
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(val_ids.begin(), val_ids.end());

  ChipBatchStream train_stream(train_ids, config.paths.chip_dir,
                               config.train.batch_size, config.train.rng_seed);
  ChipBatchStream val_stream(val_ids, config.paths.chip_dir,
                             config.train.batch_size, std::nullopt);

  UNetParams<float> init = build_unet<float>(config.model, config.train.rng_seed);
  const TrainResult result =
      train(std::move(init), train_stream, val_ids.empty() ? nullptr : &val_stream,
            config.train, [](const EpochRecord& r) {
              std::fprintf(stderr, "epoch %d  train_loss %.6g  val_loss %.6g  (%.1fs)\n",
                           r.epoch, r.train_loss, r.val_loss, r.seconds);
            });
  save_weights(result.params, config.paths.weights);
  echo_config(parent_or_current(config.paths.weights), config);

  json epochs = json::array();
  for (const auto& e : result.report.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"seconds", e.seconds}});
  }
  const json report = {
      {"format_version", kReportFormatVersion},
      {"command", "train"},
      {"loss", loss_kind_name(config.train.loss)},
      {"train_chips", train_ids.size()},
      {"validation_chips", val_ids.size()},
      {"parameter_count", result.params.parameter_count()},
      {"epochs", epochs},
      {"selected_epoch", result.report.selected_epoch},
      {"stop_reason", result.report.stop_reason},
      {"weights", config.paths.weights.string()},
  };
  write_text(config.paths.reports / "train_report.json", report.dump(2) + "\n");
  echo_config(config.paths.reports, config);
  return report.dump(2);
}

// ---------------------------------------------------------------------------
// evaluate

std::string metrics_report_json(const MetricsReport& r, const std::string& split) {
  auto number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  const json j = {
      {"format_version", kReportFormatVersion},
      {"command", "evaluate"},
      {"split", split},
      {"accuracy", number(r.accuracy)},
      {"auc", number(r.auc)},
      {"r2", number(r.r2)},
      {"mean_iou", number(r.mean_iou)},
      {"loss", number(r.loss)},
      {"pixel_count", r.pixel_count},
      {"chip_count", r.chip_count},
      {"auc_chip_count", r.auc_chip_count},
      {"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp},
                     {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
  };
  return j.dump(2);
}

std::string format_metrics_table(const std::string& row_label, const MetricsReport& r) {
  auto cell = [](double v) {
    char buf[32];
    if (std::isfinite(v)) std::snprintf(buf, sizeof buf, "%.4f", v);
    else std::snprintf(buf, sizeof buf, "n/a");
    return std::string(buf);
  };
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "| %-10s | %-8s | %-6s | %-8s | %-8s |\n", "Metric",
                "Accuracy", "AUC", "R2 Score", "Mean IoU");
  out += line;
  out += "|------------|----------|--------|----------|----------|\n";
  std::snprintf(line, sizeof line, "| %-10s | %-8s | %-6s | %-8s | %-8s |\n",
                row_label.c_str(), cell(r.accuracy).c_str(), cell(r.auc).c_str(),
                cell(r.r2).c_str(), cell(r.mean_iou).c_str());
  out += line;
  return out;
}

EvaluationOutput run_evaluate(const PipelineConfig& config, Split split) {
  if (split == Split::Excluded) {
    throw ConfigError("evaluate needs the train or test split");
  }
  const DatasetManifest manifest = read_manifest(config.paths.manifest);
  const UNetParams<float> params = load_weights(config.paths.weights);
  const UNet<float> net(params.config);
  auto stream = iterate_batches(manifest, split, config.paths.chip_dir,
                                config.train.batch_size, std::nullopt);
  if (stream->size() == 0) {
    throw EmptyDatasetError("split " + split_name(split) + " holds no chips");
  }
  const MetricsReport report = evaluate_model(net, params, *stream, config.histogram_bins);
  EvaluationOutput out;
  out.json = metrics_report_json(report, split_name(split));
  out.table = format_metrics_table(split == Split::Train ? "Training" : "Testing", report);
  const std::string stem = "metrics_" + split_name(split);
  write_text(config.paths.reports / (stem + ".json"), out.json + "\n");
  write_text(config.paths.reports / (stem + ".txt"), out.table);
  echo_config(config.paths.reports, config);
  return out;
}

// ---------------------------------------------------------------------------
// predict

std::uint8_t quantize_unit(float v) noexcept {
  const double q = std::floor(255.0 * std::clamp<double>(v, 0.0, 1.0) + 0.5);
  return static_cast<std::uint8_t>(q);
}

void write_pgm(const fs::path& path, const NdwiMap& map) {
  std::string header = "P5\n" + std::to_string(map.width) + " " +
                       std::to_string(map.height) + "\n255\n";
  std::vector<std::byte> bytes;
  bytes.reserve(header.size() + map.values.size());
  for (char ch : header) bytes.push_back(static_cast<std::byte>(ch));
  for (float v : map.values) bytes.push_back(static_cast<std::byte>(quantize_unit(v)));
  detail::write_file(path, bytes);
}

std::string run_predict(const PipelineConfig& config, const std::vector<fs::path>& inputs,
                        const fs::path& output_dir, bool export_pgm) {
  if (inputs.empty()) throw ConfigError("predict needs at least one input chip");
  const UNetParams<float> params = load_weights(config.paths.weights);
  const UNet<float> net(params.config);
  fs::create_directories(output_dir);
  json outputs = json::array();
  for (const auto& input : inputs) {
    const Raster radar = read_chip(input);
    NdwiMap ndwi;
    try {
      if (radar.channels() != params.config.input_channels) {
        throw ShapeError("expected " + std::to_string(params.config.input_channels) +
                         " channels, got " + std::to_string(radar.channels()));
      }
      ndwi = predict_raster(net, params, radar);
    } catch (const ShapeError& e) {
      throw ShapeError(input.string() + ": " + e.what());
    }
    std::string stem = input.filename().string();
    for (const char* suffix : {".cbch", ".s1"}) {
      const std::string s(suffix);
      if (stem.size() > s.size() && stem.compare(stem.size() - s.size(), s.size(), s) == 0) {
        stem.resize(stem.size() - s.size());
      }
    }
    const fs::path chip_out = output_dir / (stem + ".ndwi.cbch");
    write_chip(chip_out, ndwi.to_raster());
    json entry = {{"input", input.string()}, {"ndwi", chip_out.string()}};
    if (export_pgm) {
      const fs::path pgm = output_dir / (stem + ".ndwi.pgm");
      write_pgm(pgm, ndwi);
      entry["pgm"] = pgm.string();
    }
    outputs.push_back(entry);
  }
  echo_config(output_dir, config);
  return json{{"format_version", kReportFormatVersion},
              {"command", "predict"},
              {"outputs", outputs}}.dump(2);
}

// ---------------------------------------------------------------------------
// otsu

OtsuFileResult run_otsu(const fs::path& input, const fs::path& output_mask, int bins) {
  const Raster raster = read_chip(input);
  const NdwiMap m = unit_ndwi_from_raster(raster);
  OtsuFileResult out;
  out.result = otsu_threshold(build_histogram(m, bins));
  const WaterMask mask = binarize(m, out.result.threshold_value);
  Raster mask_raster(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    mask_raster.values()[i] = mask.values[i] ? 1.0f : 0.0f;
    out.water_pixels += mask.values[i];
  }
  out.pixel_count = mask.values.size();
  write_chip(output_mask, mask_raster);
  return out;
}

}  // namespace sarndwi
