// Copyright 2026 The DRSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "drsm/nets.hpp"

#include "drsm/binary_io.hpp"
#include "drsm/checkpoint.hpp"
#include "drsm/config.hpp"

#include <cmath>

namespace drsm {

const char* variant_tag(Variant v) {
  switch (v) {
    case Variant::kNormal: return "normal";
    case Variant::kGmm: return "gmm";
    case Variant::kVae: return "vae";
    case Variant::kVaeAdv: return "vae_adv";
    case Variant::kVaeMixed: return "vae_mixed";
  }
  return "?";
}

const char* variant_cli_name(Variant v) {
  switch (v) {
    case Variant::kVaeAdv: return "vae-adv";
    case Variant::kVaeMixed: return "vae-mixed";
    default: return variant_tag(v);
  }
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::kNormal, Variant::kGmm, Variant::kVae, Variant::kVaeAdv, Variant::kVaeMixed}) {
    if (name == variant_tag(v) || name == variant_cli_name(v)) return v;
  }
  throw ConfigError("unknown model variant '" + name + "' (expected normal, gmm, vae, vae-adv or vae-mixed)");
}

void ArchConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
  };
  positive(n_range, "n_range");
  positive(n_azimuth, "n_azimuth");
  if (n_range % 8 != 0 || n_azimuth % 8 != 0) throw ConfigError("grid extents must be divisible by 8");
  positive(object_capacity, "object_capacity");
  positive(object_features, "object_features");
  if (object_features < 4) throw ConfigError("object_features must include x, y, heading and speed");
  if (kernel < 2 || kernel % 2 != 0) throw ConfigError("kernel must be even and >= 2 for exact stride-2 halving");
  for (int c : conv_channels) positive(c, "conv_channels");
  for (int c : deconv_channels) positive(c, "deconv_channels");
  positive(object_channels, "object_channels");
  positive(encoder_hidden, "encoder_hidden");
  positive(d_x, "d_x");
  positive(d_z, "d_z");
  positive(decoder_hidden, "decoder_hidden");
  positive(gmm_components, "gmm_components");
  if (!(gmm_logvar_offset >= 0.0)) throw ConfigError("gmm_logvar_offset must be >= 0");
}

namespace {

template <std::size_t N>
std::array<int, N> parse_int_array(const std::string& key, const std::string& value) {
  const auto v = parse_double_list(key, value);
  if (v.size() != N) throw ConfigError(key + " needs " + std::to_string(N) + " values");
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (v[i] != std::floor(v[i])) throw ConfigError(key + " needs integers");
    out[i] = static_cast<int>(v[i]);
  }
  return out;
}

}  // namespace

void ArchConfig::set(const std::string& key, const std::string& value) {
  auto as_int = [&] { return static_cast<int>(parse_int(key, value)); };
  if (key == "kernel") return void(kernel = as_int());
  if (key == "conv_channels") return void(conv_channels = parse_int_array<3>(key, value));
  if (key == "object_channels") return void(object_channels = as_int());
  if (key == "encoder_hidden") return void(encoder_hidden = as_int());
  if (key == "d_x") return void(d_x = as_int());
  if (key == "d_z") return void(d_z = as_int());
  if (key == "decoder_hidden") return void(decoder_hidden = as_int());
  if (key == "deconv_channels") return void(deconv_channels = parse_int_array<3>(key, value));
  if (key == "gmm_components") return void(gmm_components = as_int());
  if (key == "gmm_logvar_offset") return void(gmm_logvar_offset = parse_double(key, value));
  throw ConfigError("unknown architecture config key '" + key + "'");
}

nlohmann::json ArchConfig::to_json() const {
  return {{"n_range", n_range},
          {"n_azimuth", n_azimuth},
          {"object_capacity", object_capacity},
          {"object_features", object_features},
          {"kernel", kernel},
          {"conv_channels", conv_channels},
          {"object_channels", object_channels},
          {"encoder_hidden", encoder_hidden},
          {"d_x", d_x},
          {"d_z", d_z},
          {"decoder_hidden", decoder_hidden},
          {"deconv_channels", deconv_channels},
          {"gmm_components", gmm_components},
          {"gmm_logvar_offset", gmm_logvar_offset},
          {"object_feature_scale", object_feature_scale}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.n_range = j.at("n_range").get<int>();
  a.n_azimuth = j.at("n_azimuth").get<int>();
  a.object_capacity = j.at("object_capacity").get<int>();
  a.object_features = j.at("object_features").get<int>();
  a.kernel = j.at("kernel").get<int>();
  a.conv_channels = j.at("conv_channels").get<std::array<int, 3>>();
  a.object_channels = j.at("object_channels").get<int>();
  a.encoder_hidden = j.at("encoder_hidden").get<int>();
  a.d_x = j.at("d_x").get<int>();
  a.d_z = j.at("d_z").get<int>();
  a.decoder_hidden = j.at("decoder_hidden").get<int>();
  a.deconv_channels = j.at("deconv_channels").get<std::array<int, 3>>();
  a.gmm_components = j.at("gmm_components").get<int>();
  a.gmm_logvar_offset = j.at("gmm_logvar_offset").get<double>();
  a.object_feature_scale = j.at("object_feature_scale").get<std::array<double, 4>>();
  a.validate();
  return a;
}

std::uint64_t architecture_hash(Variant variant, const ArchConfig& arch) {
  return fnv1a64(std::string(variant_tag(variant)) + "\n" + arch.to_json().dump());
}

void save_model(const std::string& path, const RadarModel<float>& model, const nlohmann::json& training) {
  CheckpointFile file;
  file.config_hash = architecture_hash(model.variant(), model.arch());
  nlohmann::json meta = {{"variant", variant_tag(model.variant())},
                         {"architecture", model.arch().to_json()},
                         {"training", training},
                         {"generator_tensors", model.generator().entries().size()}};
  file.metadata = meta.dump();
  file.records = to_records(model.generator());
  auto disc = to_records(model.discriminator());
  file.records.insert(file.records.end(), disc.begin(), disc.end());
  save_checkpoint(path, file);
}

RadarModel<float> load_model(const std::string& path, ModelCheckpoint* info) {
  CheckpointFile file = load_checkpoint(path);
  nlohmann::json meta;
  ModelCheckpoint ck;
  try {
    meta = nlohmann::json::parse(file.metadata);
    ck.variant = variant_from_string(meta.at("variant").get<std::string>());
    ck.arch = ArchConfig::from_json(meta.at("architecture"));
    ck.training = meta.value("training", nlohmann::json::object());
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kCorrupt, std::string("corrupt checkpoint header: ") + e.what());
  }
  if (architecture_hash(ck.variant, ck.arch) != file.config_hash) {
    throw FormatError(FormatErrorCode::kCorrupt, "checkpoint config hash does not match its architecture");
  }
  RadarModel<float> model(ck.variant, ck.arch, 0);
  const std::size_t n_gen = model.generator().entries().size();
  if (file.records.size() != n_gen + model.discriminator().entries().size()) {
    throw FormatError(FormatErrorCode::kCorrupt, "checkpoint tensor count does not match its variant");
  }
  assign_records(model.generator(), {file.records.begin(), file.records.begin() + static_cast<std::ptrdiff_t>(n_gen)});
  assign_records(model.discriminator(), {file.records.begin() + static_cast<std::ptrdiff_t>(n_gen), file.records.end()});
  if (info) *info = std::move(ck);
  return model;
}

}  // namespace drsm
