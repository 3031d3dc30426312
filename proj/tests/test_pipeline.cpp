#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <fstream>

#include "sarndwi/error.hpp"
#include "sarndwi/evaluation.hpp"
#include "sarndwi/pipeline.hpp"
#include "sarndwi/sarndwi.h"
#include "sarndwi/synthetic.hpp"
#include "support.hpp"

using namespace sarndwi;
using nlohmann::json;
using testing_support::TempDir;

namespace {

PipelineConfig config_in(const TempDir& dir) {
  PipelineConfig c;
  c.paths.scene_dir = dir / "scenes";
  c.paths.chip_dir = dir / "chips";
  c.paths.manifest = dir / "chips/manifest.json";
  c.paths.weights = dir / "model/weights.cbwt";
  c.paths.reports = dir / "reports";
  c.model.encoder_filters = {4, 8};
  c.model.bottleneck_filters = 16;
  c.model.decoder_filters = {8, 4};
  c.train.max_epochs = 2;
  c.train.batch_size = 8;
  return c;
}

void make_scenes(const TempDir& dir, int count, double cloudy_share = 0.25) {
  SyntheticOptions opts;
  opts.scene_count = count;
  opts.cloudy_share = cloudy_share;
  write_synthetic_scenes(dir / "scenes", opts);
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, JsonRoundTripAndOverrides) {
  PipelineConfig c;
  c.train.max_epochs = 7;
  c.dataset.split_unit = SplitUnit::Chip;
  const PipelineConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));

  apply_override(c, "train.max_epochs", "3");
  EXPECT_EQ(c.train.max_epochs, 3);
  apply_override(c, "paths.chip_dir", "123");
  EXPECT_EQ(c.paths.chip_dir, "123");
  apply_override(c, "model.encoder_filters", "[8, 16]");
  EXPECT_EQ(c.model.decoder_filters, (std::vector<int>{16, 8}));
  apply_override(c, "train.loss", "binary_cross_entropy");
  EXPECT_EQ(c.train.loss, LossKind::BinaryCrossEntropy);
  EXPECT_EQ(config_value(c, "metrics.histogram_bins"), "256");

  EXPECT_THROW(apply_override(c, "train.nope", "1"), ConfigError);
  EXPECT_THROW(apply_override(c, "train.max_epochs", "\"many\""), ConfigError);
  EXPECT_THROW(apply_override(c, "dataset.split_unit", "galaxy"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"train": {"epochz": 3}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"metrics": {"histogram_bins": 1}})"), BinCountError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Preprocess, CountsDeterminismAndEcho) {
  TempDir dir("pre");
  make_scenes(dir, 5);
  const PipelineConfig c = config_in(dir);
  const json a = json::parse(run_preprocess(c));
  EXPECT_EQ(a["format_version"], 1);
  EXPECT_EQ(a["scenes"], 5);
  EXPECT_EQ(a["total_chips"], 80);
  EXPECT_EQ(a["retained"].get<int>() + a["excluded"].get<int>(), 80);
  EXPECT_EQ(a["train"].get<int>() + a["test"].get<int>(), a["retained"].get<int>());
  EXPECT_GT(a["excluded"].get<int>(), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "chips/effective_config.json"));

  const DatasetManifest m = read_manifest(c.paths.manifest);
  for (const auto& r : m.records) {
    const bool on_disk = std::filesystem::exists(radar_chip_path(c.paths.chip_dir, r.chip_id));
    EXPECT_EQ(on_disk, r.split != Split::Excluded) << r.chip_id;
    if (r.split == Split::Excluded) EXPECT_GT(r.cloud_fraction, 0.0);
  }
  const Raster radar = read_chip(radar_chip_path(c.paths.chip_dir, m.records[0].chip_id));
  EXPECT_EQ(radar.channels(), 2);
  for (float v : radar.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);

  const json b = json::parse(run_preprocess(c));
  EXPECT_EQ(a["manifest_checksum"], b["manifest_checksum"]);
}

TEST(Preprocess, GlobalNormalizationRecordsRanges) {
  TempDir dir("pre_global");
  make_scenes(dir, 2, 0.0);
  PipelineConfig c = config_in(dir);
  c.dataset.normalization_mode = NormalizationMode::GlobalMinMax;
  run_preprocess(c);
  const DatasetManifest m = read_manifest(c.paths.manifest);
  ASSERT_EQ(m.global_ranges.size(), 2u);
  EXPECT_LT(m.global_ranges[0].min, m.global_ranges[0].max);
}

TEST(Preprocess, EmptySceneDirectory) {
  TempDir dir("pre_empty");
  std::filesystem::create_directories(dir / "scenes");
  EXPECT_THROW(run_preprocess(config_in(dir)), EmptyDatasetError);
}

TEST(Train, MissingManifestIsConfigError) {
  TempDir dir("train_missing");
  EXPECT_THROW(run_train(config_in(dir)), ConfigError);
}

TEST(Pipeline, TrainEvaluatePredictOtsu) {
  TempDir dir("pipeline");
  make_scenes(dir, 3);
  const PipelineConfig c = config_in(dir);
  run_preprocess(c);
  const json tr = json::parse(run_train(c));
  EXPECT_EQ(tr["format_version"], 1);
  EXPECT_EQ(tr["epochs"].size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(c.paths.weights));
  EXPECT_TRUE(std::filesystem::exists(dir / "reports/train_report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "model/effective_config.json"));

  const EvaluationOutput ev = run_evaluate(c, Split::Test);
  const json m = json::parse(ev.json);
  EXPECT_EQ(m["split"], "test");
  for (const char* k : {"accuracy", "mean_iou"}) {
    EXPECT_GE(m[k].get<double>(), 0.0);
    EXPECT_LE(m[k].get<double>(), 1.0);
  }
  EXPECT_LE(m["r2"].get<double>(), 1.0);
  EXPECT_NE(ev.table.find("Testing"), std::string::npos);
  EXPECT_NE(ev.table.find("Mean IoU"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "reports/metrics_test.json"));
  EXPECT_NE(run_evaluate(c, Split::Train).table.find("Training"), std::string::npos);

  // A radar chip from a cloudy scene still gets a prediction.
  SyntheticOptions cloudy;
  cloudy.cloudy_share = 1.0;
  const auto tiles = chip_scene(synthetic_scene(0, cloudy));
  const SceneTile* clouded = nullptr;
  for (const auto& t : tiles)
    if (t.cloud_fraction > 0.0) clouded = &t;
  ASSERT_NE(clouded, nullptr);
  write_chip(dir / "in/cloudy.s1.cbch",
             normalize_chip(clouded->radar, NormalizationMode::PerChipMinMax));
  const json pr = json::parse(run_predict(c, {dir / "in/cloudy.s1.cbch"}, dir / "out", true));
  EXPECT_EQ(pr["outputs"].size(), 1u);
  const Raster ndwi = read_chip(dir / "out/cloudy.ndwi.cbch");
  EXPECT_EQ(ndwi.channels(), 1);
  for (float v : ndwi.values()) ASSERT_TRUE(v > 0.0f && v < 1.0f);

  // PGM export quantizes each pixel to floor(255 v + 0.5).
  const std::string pgm = read_text(dir / "out/cloudy.ndwi.pgm");
  const std::string header = "P5\n128 128\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  ASSERT_EQ(pgm.size(), header.size() + 128 * 128);
  for (std::size_t i = 0; i < ndwi.size(); ++i) {
    const auto q = static_cast<unsigned char>(pgm[header.size() + i]);
    ASSERT_EQ(q, static_cast<unsigned>(std::floor(255.0 * ndwi.values()[i] + 0.5)));
  }

  // Otsu on the prediction writes a {0,1} mask.
  const OtsuFileResult o = run_otsu(dir / "out/cloudy.ndwi.cbch", dir / "out/mask.cbch", 256);
  const Raster mask = read_chip(dir / "out/mask.cbch");
  std::size_t water = 0;
  for (float v : mask.values()) {
    ASSERT_TRUE(v == 0.0f || v == 1.0f);
    water += v == 1.0f;
  }
  EXPECT_EQ(water, o.water_pixels);
  EXPECT_EQ(o.pixel_count, 128u * 128u);

  EXPECT_THROW(run_predict(c, {dir / "out/mask.cbch"}, dir / "out2", false), ShapeError);
}

TEST(Pipeline, OracleTargetsScorePerfectly) {
  // Replace each test chip's reference NDWI with the model's own prediction;
  // evaluation must then report perfect accuracy and R2.
  TempDir dir("pipeline_oracle");
  make_scenes(dir, 2, 0.0);
  PipelineConfig c = config_in(dir);
  c.train.max_epochs = 1;
  run_preprocess(c);
  run_train(c);
  const DatasetManifest m = read_manifest(c.paths.manifest);
  const auto params = load_weights(c.paths.weights);
  const UNet<float> net(params.config);
  for (const auto& id : chip_ids_for_split(m, Split::Test)) {
    const Raster radar = read_chip(radar_chip_path(c.paths.chip_dir, id));
    write_chip(ndwi_chip_path(c.paths.chip_dir, id), predict_raster(net, params, radar).to_raster());
  }
  const json r = json::parse(run_evaluate(c, Split::Test).json);
  EXPECT_EQ(r["accuracy"].get<double>(), 1.0);
  EXPECT_EQ(r["r2"].get<double>(), 1.0);
  EXPECT_EQ(r["mean_iou"].get<double>(), 1.0);
}

TEST(Pipeline, EvaluateMissingChip) {
  TempDir dir("pipeline_missing_chip");
  make_scenes(dir, 2, 0.0);
  PipelineConfig c = config_in(dir);
  c.train.max_epochs = 1;
  run_preprocess(c);
  run_train(c);
  const DatasetManifest m = read_manifest(c.paths.manifest);
  const auto test_ids = chip_ids_for_split(m, Split::Test);
  ASSERT_FALSE(test_ids.empty());
  std::filesystem::remove(ndwi_chip_path(c.paths.chip_dir, test_ids.front()));
  EXPECT_THROW(run_evaluate(c, Split::Test), MissingChipError);
}

TEST(CApi, StatusCodesAndMessages) {
  EXPECT_STREQ(sn_status_name(SN_OK), "OK");
  EXPECT_STREQ(sn_status_name(SN_ERR_DEGENERATE_HISTOGRAM), "DegenerateHistogramError");
  EXPECT_STREQ(sn_status_name(SN_ERR_INTERNAL), "InternalError");
  EXPECT_NE(std::string(sn_version()), "");

  sn_config* cfg = nullptr;
  ASSERT_EQ(sn_config_create(&cfg), SN_OK);
  EXPECT_EQ(sn_config_set(cfg, "train.bogus", "1"), SN_ERR_CONFIG);
  EXPECT_EQ(std::string(sn_last_error()).rfind("ConfigError: ", 0), 0u) << sn_last_error();
  EXPECT_EQ(sn_config_set(cfg, "train.max_epochs", "4"), SN_OK);
  EXPECT_STREQ(sn_last_error(), "");
  char* text = nullptr;
  ASSERT_EQ(sn_config_get(cfg, "train.max_epochs", &text), SN_OK);
  EXPECT_STREQ(text, "4");
  sn_string_free(text);
  EXPECT_EQ(sn_config_get(cfg, nullptr, &text), SN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(sn_config_parse("{not json", &cfg), SN_ERR_CONFIG);
  sn_config_free(cfg);

  EXPECT_EQ(sn_config_load("/nonexistent.json", &cfg), SN_ERR_CONFIG);
  sn_otsu_summary s{};
  EXPECT_EQ(sn_otsu_chip("/nonexistent.cbch", "/tmp/x.cbch", 256, &s), SN_ERR_IO);
  EXPECT_EQ(std::string(sn_last_error()).rfind("IoError: ", 0), 0u);
}

TEST(CApi, EndToEndAndModelHandle) {
  TempDir dir("capi");
  ASSERT_EQ(sn_generate_synthetic((dir / "scenes").c_str(), 2, 5, 0.0), SN_OK);
  const PipelineConfig pc = config_in(dir);
  sn_config* cfg = nullptr;
  ASSERT_EQ(sn_config_parse(config_to_json(pc).c_str(), &cfg), SN_OK);
  ASSERT_EQ(sn_config_set(cfg, "train.max_epochs", "1"), SN_OK);

  char* report = nullptr;
  ASSERT_EQ(sn_preprocess(cfg, &report), SN_OK) << sn_last_error();
  EXPECT_EQ(json::parse(report)["total_chips"], 32);
  sn_string_free(report);
  ASSERT_EQ(sn_train(cfg, &report), SN_OK) << sn_last_error();
  sn_string_free(report);
  char* table = nullptr;
  ASSERT_EQ(sn_evaluate(cfg, "test", &report, &table), SN_OK) << sn_last_error();
  EXPECT_NE(std::string(table).find("Testing"), std::string::npos);
  sn_string_free(report);
  sn_string_free(table);
  EXPECT_EQ(sn_evaluate(cfg, "validation", &report, nullptr), SN_ERR_CONFIG);

  sn_model* model = nullptr;
  ASSERT_EQ(sn_model_load((dir / "model/weights.cbwt").c_str(), &model), SN_OK);
  char* mcfg = nullptr;
  ASSERT_EQ(sn_model_config_json(model, &mcfg), SN_OK);
  EXPECT_EQ(json::parse(mcfg)["bottleneck_filters"], 16);
  sn_string_free(mcfg);

  const DatasetManifest m = read_manifest(pc.paths.manifest);
  const Raster radar = read_chip(radar_chip_path(pc.paths.chip_dir, m.records[0].chip_id));
  std::vector<float> out(128 * 128);
  ASSERT_EQ(sn_model_predict(model, radar.values().data(), 128, 128, 2, out.data()), SN_OK);
  const auto params = load_weights(pc.paths.weights);
  EXPECT_EQ(out, predict_raster(UNet<float>(params.config), params, radar).values);
  EXPECT_EQ(sn_model_predict(model, radar.values().data(), 126, 128, 2, out.data()), SN_ERR_SHAPE);
  EXPECT_EQ(std::string(sn_last_error()).rfind("ShapeError: ", 0), 0u);
  sn_model_free(model);
  sn_config_free(cfg);
}
