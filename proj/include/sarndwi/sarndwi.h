/*
 * C interface to the SAR-to-NDWI pipeline.
 *
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns an sn_status; on
 * failure sn_last_error() holds a message for the calling thread, prefixed
 * with the error category (e.g. "DimensionError: ..."). Strings returned
 * through char** out-parameters are heap-allocated and must be released with
 * sn_string_free().
 */
#ifndef SARNDWI_H_
#define SARNDWI_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SN_API __declspec(dllexport)
#else
#define SN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sn_status {
  SN_OK = 0,
  SN_ERR_CONFIG = 1,
  SN_ERR_IO = 2,
  SN_ERR_FORMAT = 3,
  SN_ERR_DIMENSION = 4,
  SN_ERR_SHAPE = 5,
  SN_ERR_NON_FINITE = 6,
  SN_ERR_NEGATIVE_RADIANCE = 7,
  SN_ERR_SCALE = 8,
  SN_ERR_BIN_COUNT = 9,
  SN_ERR_DOMAIN = 10,
  SN_ERR_DEGENERATE_HISTOGRAM = 11,
  SN_ERR_SINGLE_CLASS = 12,
  SN_ERR_ZERO_VARIANCE = 13,
  SN_ERR_EMPTY_DATASET = 14,
  SN_ERR_MISSING_CHIP = 15,
  SN_ERR_DIVERGENCE = 16,
  SN_ERR_INVALID_ARGUMENT = 17,
  SN_ERR_INTERNAL = 100
} sn_status;

typedef struct sn_config sn_config;
typedef struct sn_model sn_model;

typedef struct sn_otsu_summary {
  int t_star;
  double threshold_value;
  size_t water_pixels;
  size_t pixel_count;
} sn_otsu_summary;

SN_API const char* sn_version(void);
SN_API const char* sn_status_name(sn_status status);
SN_API const char* sn_last_error(void);
SN_API void sn_string_free(char* s);

/* Configuration: defaults, a JSON file, or JSON text; flag-style overrides
 * use dotted keys such as "train.max_epochs". */
SN_API sn_status sn_config_create(sn_config** out);
SN_API sn_status sn_config_load(const char* path, sn_config** out);
SN_API sn_status sn_config_parse(const char* json_text, sn_config** out);
SN_API sn_status sn_config_set(sn_config* config, const char* key, const char* value);
/* JSON text of one dotted key, e.g. "metrics.histogram_bins" -> "256". */
SN_API sn_status sn_config_get(const sn_config* config, const char* key, char** out_json);
SN_API sn_status sn_config_to_json(const sn_config* config, char** out_json);
SN_API void sn_config_free(sn_config* config);

/* Pipeline commands. Each writes its outputs under the configured paths and
 * returns a JSON report with a top-level format_version. */
SN_API sn_status sn_preprocess(const sn_config* config, char** out_report);
SN_API sn_status sn_train(const sn_config* config, char** out_report);
/* split: "train" or "test"; out_table may be NULL. */
SN_API sn_status sn_evaluate(const sn_config* config, const char* split,
                             char** out_report, char** out_table);
SN_API sn_status sn_predict(const sn_config* config, const char* const* inputs,
                            size_t input_count, const char* output_dir,
                            int export_pgm, char** out_report);
SN_API sn_status sn_otsu_chip(const char* input_path, const char* output_mask_path,
                              int bins, sn_otsu_summary* out);

/* Writes procedural paired scenes (scene_0000, ...) into dir. */
SN_API sn_status sn_generate_synthetic(const char* dir, int scene_count,
                                       uint64_t seed, double cloudy_share);

/* Trained model handle for in-process inference. */
SN_API sn_status sn_model_load(const char* weights_path, sn_model** out);
SN_API sn_status sn_model_config_json(const sn_model* model, char** out_json);
/* radar: height*width*input_channels floats, channel-last; ndwi_out:
 * height*width floats in (0, 1). */
SN_API sn_status sn_model_predict(const sn_model* model, const float* radar,
                                  int height, int width, int channels,
                                  float* ndwi_out);
SN_API void sn_model_free(sn_model* model);

#ifdef __cplusplus
}
#endif

#endif /* SARNDWI_H_ */
