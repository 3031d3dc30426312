// Command-line front end. Talks to the library exclusively through the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sarndwi/sarndwi.h"

namespace {

struct Failure {
  sn_status status;
};

void check(sn_status status) {
  if (status != SN_OK) throw Failure{status};
}

// Owns a string returned through the C API.
class CString {
 public:
  CString() = default;
  CString(const CString&) = delete;
  CString& operator=(const CString&) = delete;
  ~CString() { sn_string_free(ptr_); }
  char** out() { return &ptr_; }
  const char* get() const { return ptr_ ? ptr_ : ""; }

 private:
  char* ptr_ = nullptr;
};

class Config {
 public:
  explicit Config(const std::string& path) {
    check(path.empty() ? sn_config_create(&cfg_) : sn_config_load(path.c_str(), &cfg_));
  }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { sn_config_free(cfg_); }

  void set(const std::string& key, const std::string& value) {
    check(sn_config_set(cfg_, key.c_str(), value.c_str()));
  }
  const sn_config* get() const { return cfg_; }

  void echo() const {
    CString text;
    check(sn_config_to_json(cfg_, text.out()));
    std::fprintf(stderr, "effective config:\n%s\n", text.get());
  }

 private:
  sn_config* cfg_ = nullptr;
};

// Flag overrides, in the order they apply; later entries win.
struct Overrides {
  std::vector<std::string> generic;  // key=value from --set
  std::vector<std::pair<std::string, std::optional<std::string>>> flags;

  void bind(CLI::App* app, const std::string& flag, const std::string& key,
            const std::string& help) {
    flags.emplace_back(key, std::nullopt);
    const std::size_t idx = flags.size() - 1;
    app->add_option_function<std::string>(
        flag, [this, idx](const std::string& v) { flags[idx].second = v; }, help);
  }

  void apply(Config& cfg) const {
    for (const auto& kv : generic) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "ConfigError: --set expects key=value, got '%s'\n", kv.c_str());
        throw Failure{SN_ERR_CONFIG};
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flags) {
      if (value) cfg.set(key, *value);
    }
  }
};

std::string list_json(const std::string& csv) {
  return "[" + csv + "]";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAR-to-NDWI pipeline: preprocess, train, evaluate, predict, otsu"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  app.add_option("-c,--config", config_path, "JSON configuration file");
  app.add_option("--set", ov.generic, "Override a config key, e.g. train.max_epochs=5");

  auto* pre = app.add_subcommand("preprocess", "Chip scenes, filter clouds, split, write manifest");
  pre->fallthrough();
  ov.bind(pre, "--scene-dir", "paths.scene_dir", "Directory of scene folders");
  ov.bind(pre, "--chip-dir", "paths.chip_dir", "Output chip directory");
  ov.bind(pre, "--manifest", "paths.manifest", "Manifest path");
  ov.bind(pre, "--cloud-threshold", "dataset.cloud_threshold", "Max cloud fraction kept");
  ov.bind(pre, "--normalization", "dataset.normalization_mode",
          "per_chip_minmax or global_minmax");
  ov.bind(pre, "--split-unit", "dataset.split_unit", "scene or chip");
  ov.bind(pre, "--split-seed", "dataset.split_seed", "Split seed");
  ov.bind(pre, "--train-fraction", "dataset.train_fraction", "Train share of retained chips");

  auto* tr = app.add_subcommand("train", "Train the U-Net on the manifest's train split");
  tr->fallthrough();
  ov.bind(tr, "--manifest", "paths.manifest", "Manifest path");
  ov.bind(tr, "--chip-dir", "paths.chip_dir", "Chip directory");
  ov.bind(tr, "--weights", "paths.weights", "Output weights file");
  ov.bind(tr, "--reports", "paths.reports", "Report directory");
  ov.bind(tr, "--epochs", "train.max_epochs", "Maximum epochs");
  ov.bind(tr, "--batch-size", "train.batch_size", "Batch size");
  ov.bind(tr, "--learning-rate", "train.learning_rate", "Adam learning rate");
  ov.bind(tr, "--patience", "train.patience", "Early-stopping patience");
  ov.bind(tr, "--loss", "train.loss", "mean_squared_error or binary_cross_entropy");
  ov.bind(tr, "--seed", "train.rng_seed", "Initialization/shuffle seed");
  ov.bind(tr, "--validation-fraction", "train.validation_fraction",
          "Share of train chips held out for model selection");
  std::string encoder_filters;
  tr->add_option("--encoder-filters", encoder_filters,
                 "Comma-separated encoder filter counts, e.g. 64,128,256,512");
  ov.bind(tr, "--bottleneck", "model.bottleneck_filters", "Bottleneck filters");

  auto* ev = app.add_subcommand("evaluate", "Score the model on a split");
  ev->fallthrough();
  std::string split = "test";
  ev->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ov.bind(ev, "--manifest", "paths.manifest", "Manifest path");
  ov.bind(ev, "--chip-dir", "paths.chip_dir", "Chip directory");
  ov.bind(ev, "--weights", "paths.weights", "Weights file");
  ov.bind(ev, "--reports", "paths.reports", "Report directory");
  ov.bind(ev, "--bins", "metrics.histogram_bins", "Otsu histogram bins");

  auto* pr = app.add_subcommand("predict", "Generate NDWI chips from radar chips");
  pr->fallthrough();
  std::vector<std::string> inputs;
  std::string output_dir = "predictions";
  bool export_pgm = false;
  pr->add_option("inputs", inputs, "Radar chip files (.cbch)")->required();
  pr->add_option("-o,--output-dir", output_dir, "Output directory");
  pr->add_flag("--pgm", export_pgm, "Also write 8-bit PGM previews");
  ov.bind(pr, "--weights", "paths.weights", "Weights file");

  auto* ot = app.add_subcommand("otsu", "Otsu-threshold a single-channel NDWI chip");
  ot->fallthrough();
  std::string otsu_in;
  std::string otsu_out;
  std::optional<int> bins;
  ot->add_option("input", otsu_in, "Unit-scale NDWI chip")->required();
  ot->add_option("-o,--output", otsu_out, "Mask chip to write")->required();
  ot->add_option("--bins", bins, "Histogram bins (default: metrics.histogram_bins)");

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg(config_path);
    ov.apply(cfg);
    if (!encoder_filters.empty()) cfg.set("model.encoder_filters", list_json(encoder_filters));
    cfg.echo();

    if (*pre) {
      CString report;
      check(sn_preprocess(cfg.get(), report.out()));
      std::printf("%s\n", report.get());
    } else if (*tr) {
      CString report;
      check(sn_train(cfg.get(), report.out()));
      std::printf("%s\n", report.get());
    } else if (*ev) {
      CString report;
      CString table;
      check(sn_evaluate(cfg.get(), split.c_str(), report.out(), table.out()));
      std::printf("%s\n", report.get());
      std::fputs(table.get(), stderr);
    } else if (*pr) {
      std::vector<const char*> ptrs;
      for (const auto& s : inputs) ptrs.push_back(s.c_str());
      CString report;
      check(sn_predict(cfg.get(), ptrs.data(), ptrs.size(), output_dir.c_str(),
                       export_pgm ? 1 : 0, report.out()));
      std::printf("%s\n", report.get());
    } else if (*ot) {
      int effective_bins = 256;
      if (bins) {
        effective_bins = *bins;
      } else {
        CString text;
        check(sn_config_get(cfg.get(), "metrics.histogram_bins", text.out()));
        effective_bins = std::stoi(text.get());
      }
      sn_otsu_summary summary{};
      check(sn_otsu_chip(otsu_in.c_str(), otsu_out.c_str(), effective_bins, &summary));
      std::printf(
          "{\n  \"format_version\": 1,\n  \"command\": \"otsu\",\n  \"t_star\": %d,\n"
          "  \"threshold_value\": %.17g,\n  \"water_pixels\": %zu,\n  \"pixel_count\": %zu,\n"
          "  \"mask\": \"%s\"\n}\n",
          summary.t_star, summary.threshold_value, summary.water_pixels,
          summary.pixel_count, otsu_out.c_str());
    }
  } catch (const Failure& f) {
    const char* msg = sn_last_error();
    if (msg && *msg) std::fprintf(stderr, "%s\n", msg);
    return static_cast<int>(f.status);
  }
  return 0;
}
