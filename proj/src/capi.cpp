#include "sarndwi/sarndwi.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "sarndwi/error.hpp"
#include "sarndwi/model.hpp"
#include "sarndwi/pipeline.hpp"
#include "sarndwi/synthetic.hpp"
#include "json_io.hpp"

struct sn_config {
  sarndwi::PipelineConfig value;
};

struct sn_model {
  sarndwi::UNetParams<float> params;
  sarndwi::UNet<float> net;
};

namespace {

thread_local std::string g_last_error;

sn_status to_status(sarndwi::ErrorCode code) {
  return static_cast<sn_status>(static_cast<int>(code));
}

template <typename F>
sn_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return SN_OK;
  } catch (const sarndwi::Error& e) {
    g_last_error = std::string(sarndwi::error_code_name(e.code())) + ": " + e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "InternalError: out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("InternalError: ") + e.what();
  } catch (...) {
    g_last_error = "InternalError: unknown exception";
  }
  return SN_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw sarndwi::InvalidArgumentError(std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* sn_version(void) { return "1.0.0"; }

const char* sn_status_name(sn_status status) {
  if (status == SN_OK) return "OK";
  if (status == SN_ERR_INTERNAL) return "InternalError";
  if (status >= SN_ERR_CONFIG && status <= SN_ERR_INVALID_ARGUMENT) {
    return sarndwi::error_code_name(static_cast<sarndwi::ErrorCode>(status)).data();
  }
  return "UnknownStatus";
}

const char* sn_last_error(void) { return g_last_error.c_str(); }

void sn_string_free(char* s) { std::free(s); }

sn_status sn_config_create(sn_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sn_config{};
  });
}

sn_status sn_config_load(const char* path, sn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_config{sarndwi::load_config(path)};
  });
}

sn_status sn_config_parse(const char* json_text, sn_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new sn_config{sarndwi::config_from_json(json_text)};
  });
}

sn_status sn_config_set(sn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    sarndwi::apply_override(config->value, key, value);
  });
}

sn_status sn_config_get(const sn_config* config, const char* key, char** out_json) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(out_json, "out_json");
    *out_json = dup_string(sarndwi::config_value(config->value, key));
  });
}

sn_status sn_config_to_json(const sn_config* config, char** out_json) {
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    *out_json = dup_string(sarndwi::config_to_json(config->value));
  });
}

void sn_config_free(sn_config* config) { delete config; }

sn_status sn_preprocess(const sn_config* config, char** out_report) {
  return guarded([&] {
    require(config, "config");
    const std::string report = sarndwi::run_preprocess(config->value);
    if (out_report) *out_report = dup_string(report);
  });
}

sn_status sn_train(const sn_config* config, char** out_report) {
  return guarded([&] {
    require(config, "config");
    const std::string report = sarndwi::run_train(config->value);
    if (out_report) *out_report = dup_string(report);
  });
}

sn_status sn_evaluate(const sn_config* config, const char* split, char** out_report,
                      char** out_table) {
  return guarded([&] {
    require(config, "config");
    require(split, "split");
    const auto out = sarndwi::run_evaluate(config->value, sarndwi::parse_split(split));
    if (out_report) *out_report = dup_string(out.json);
    if (out_table) *out_table = dup_string(out.table);
  });
}

sn_status sn_predict(const sn_config* config, const char* const* inputs,
                     size_t input_count, const char* output_dir, int export_pgm,
                     char** out_report) {
  return guarded([&] {
    require(config, "config");
    require(output_dir, "output_dir");
    if (input_count > 0) require(inputs, "inputs");
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < input_count; ++i) {
      require(inputs[i], "input path");
      paths.emplace_back(inputs[i]);
    }
    const std::string report =
        sarndwi::run_predict(config->value, paths, output_dir, export_pgm != 0);
    if (out_report) *out_report = dup_string(report);
  });
}

sn_status sn_otsu_chip(const char* input_path, const char* output_mask_path, int bins,
                       sn_otsu_summary* out) {
  return guarded([&] {
    require(input_path, "input_path");
    require(output_mask_path, "output_mask_path");
    const auto r = sarndwi::run_otsu(input_path, output_mask_path, bins);
    if (out) {
      out->t_star = r.result.t_star;
      out->threshold_value = r.result.threshold_value;
      out->water_pixels = r.water_pixels;
      out->pixel_count = r.pixel_count;
    }
  });
}

sn_status sn_generate_synthetic(const char* dir, int scene_count, uint64_t seed,
                                double cloudy_share) {
  return guarded([&] {
    require(dir, "dir");
    if (scene_count < 0) throw sarndwi::InvalidArgumentError("scene_count must be >= 0");
    sarndwi::SyntheticOptions opts;
    opts.scene_count = scene_count;
    opts.seed = seed;
    opts.cloudy_share = cloudy_share;
    sarndwi::write_synthetic_scenes(dir, opts);
  });
}

sn_status sn_model_load(const char* weights_path, sn_model** out) {
  return guarded([&] {
    require(weights_path, "weights_path");
    require(out, "out");
    auto params = sarndwi::load_weights(weights_path);
    sarndwi::UNet<float> net(params.config);
    *out = new sn_model{std::move(params), std::move(net)};
  });
}

sn_status sn_model_config_json(const sn_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    *out_json = dup_string(nlohmann::json(model->params.config).dump(2));
  });
}

sn_status sn_model_predict(const sn_model* model, const float* radar, int height,
                           int width, int channels, float* ndwi_out) {
  return guarded([&] {
    require(model, "model");
    require(radar, "radar");
    require(ndwi_out, "ndwi_out");
    if (height <= 0 || width <= 0 || channels <= 0) {
      throw sarndwi::ShapeError("dimensions must be positive");
    }
    const std::size_t n = static_cast<std::size_t>(height) * width * channels;
    sarndwi::Raster r(height, width, channels, std::vector<float>(radar, radar + n));
    const auto m = sarndwi::predict_raster(model->net, model->params, r);
    std::memcpy(ndwi_out, m.values.data(), m.values.size() * sizeof(float));
  });
}

void sn_model_free(sn_model* model) { delete model; }

}  // extern "C"
