#pragma once

#include <json.hpp>

#include "sarndwi/dataset.hpp"
#include "sarndwi/model.hpp"

namespace sarndwi {

// Missing keys keep the defaults already present in `out`.
template <typename V>
void read_optional(const nlohmann::json& j, const char* key, V& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

inline void to_json(nlohmann::json& j, const UNetConfig& c) {
  j = {{"input_channels", c.input_channels},
       {"encoder_filters", c.encoder_filters},
       {"bottleneck_filters", c.bottleneck_filters},
       {"decoder_filters", c.decoder_filters},
       {"convs_per_block", c.convs_per_block},
       {"kernel", 3},
       {"pool", 2},
       {"upsample", "transposed_conv_2x2_stride_2"},
       {"hidden_activation", "relu"},
       {"output_activation", "sigmoid"}};
}

inline void from_json(const nlohmann::json& j, UNetConfig& c) {
  read_optional(j, "input_channels", c.input_channels);
  bool has_decoder = j.contains("decoder_filters");
  read_optional(j, "encoder_filters", c.encoder_filters);
  read_optional(j, "bottleneck_filters", c.bottleneck_filters);
  read_optional(j, "convs_per_block", c.convs_per_block);
  if (has_decoder) {
    read_optional(j, "decoder_filters", c.decoder_filters);
  } else {
    c.decoder_filters.assign(c.encoder_filters.rbegin(), c.encoder_filters.rend());
  }
}

inline void to_json(nlohmann::json& j, const BandMap& b) {
  j = {{"vv", b.vv}, {"vh", b.vh}, {"green", b.green}, {"nir", b.nir},
       {"cloud", b.cloud}};
}

inline void from_json(const nlohmann::json& j, BandMap& b) {
  read_optional(j, "vv", b.vv);
  read_optional(j, "vh", b.vh);
  read_optional(j, "green", b.green);
  read_optional(j, "nir", b.nir);
  read_optional(j, "cloud", b.cloud);
}

inline void to_json(nlohmann::json& j, const ValueRange& r) {
  j = {{"min", r.min}, {"max", r.max}};
}

inline void from_json(const nlohmann::json& j, ValueRange& r) {
  j.at("min").get_to(r.min);
  j.at("max").get_to(r.max);
}

inline void to_json(nlohmann::json& j, const ChipRecord& r) {
  j = {{"chip_id", r.chip_id},
       {"parent_scene_id", r.parent_scene_id},
       {"event_id", r.event_id},
       {"grid_row", r.grid_row},
       {"grid_col", r.grid_col},
       {"cloud_fraction", r.cloud_fraction},
       {"split", split_name(r.split)}};
}

inline void from_json(const nlohmann::json& j, ChipRecord& r) {
  j.at("chip_id").get_to(r.chip_id);
  j.at("parent_scene_id").get_to(r.parent_scene_id);
  read_optional(j, "event_id", r.event_id);
  j.at("grid_row").get_to(r.grid_row);
  j.at("grid_col").get_to(r.grid_col);
  j.at("cloud_fraction").get_to(r.cloud_fraction);
  r.split = parse_split(j.at("split").get<std::string>());
}

}  // namespace sarndwi
