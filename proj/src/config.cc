/*
 * Copyright 2026 The EmoHRNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "dataset.h"
#include "error.h"

namespace emohrnet {
namespace {

void reject_unknown(const json& j, const char* section,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    fail(ErrorKind::kInvalidArgument, std::string(section) + " must be a JSON object");
  }
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) {
      fail(ErrorKind::kInvalidArgument,
           std::string("unknown key '") + it.key() + "' in section '" + section + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    const json& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("expected boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw std::invalid_argument("expected non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("expected number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("expected string");
    }
    out = v.get<T>();
  } catch (const std::exception& e) {
    fail(ErrorKind::kInvalidArgument,
         std::string(section) + "." + key + ": " + e.what());
  }
}

}  // namespace

std::string DataConfig::effective_schema() const {
  if (merge_calm && schema == "ravdess") return "ravdess7";
  return schema;
}

json to_json(const DspConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},   {"hop", c.hop},
          {"n_mels", c.n_mels},           {"fmin", c.fmin},     {"fmax", c.fmax},
          {"log_floor", c.log_floor}};
}

json to_json(const AugmentPolicy& c) {
  return {{"F", c.freq_mask_width},      {"T", c.time_mask_width},
          {"n_freq_masks", c.n_freq_masks}, {"n_time_masks", c.n_time_masks},
          {"max_shift", c.max_shift},    {"mask_value", c.mask_value},
          {"enabled", c.enabled}};
}

json to_json(const HRNetConfig& c) {
  return {{"in_frames", c.in_frames},
          {"in_mels", c.in_mels},
          {"stem_channels", c.stem_channels},
          {"n_stages", c.n_stages},
          {"branch_channels", c.branch_channels},
          {"blocks_per_branch", c.blocks_per_branch},
          {"n_classes", c.n_classes},
          {"fuse_channels", c.fuse_channels}};
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps_adam", c.eps_adam},
          {"weight_decay", c.weight_decay},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"micro_batch", c.micro_batch}};
}

json to_json(const DataConfig& c) {
  return {{"manifest", c.manifest},
          {"schema", c.schema},
          {"n_frames_target", c.n_frames_target},
          {"merge_calm", c.merge_calm}};
}

json to_json(const EngineConfig& c) {
  return {{"dsp", to_json(c.dsp)},
          {"augment", to_json(c.augment)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"data", to_json(c.data)}};
}

DspConfig dsp_from_json(const json& j) {
  reject_unknown(j, "dsp", {"sample_rate", "n_fft", "hop", "n_mels", "fmin", "fmax", "log_floor"});
  DspConfig c;
  read(j, "dsp", "sample_rate", c.sample_rate);
  read(j, "dsp", "n_fft", c.n_fft);
  read(j, "dsp", "hop", c.hop);
  read(j, "dsp", "n_mels", c.n_mels);
  read(j, "dsp", "fmin", c.fmin);
  read(j, "dsp", "fmax", c.fmax);
  read(j, "dsp", "log_floor", c.log_floor);
  return c;
}

AugmentPolicy augment_from_json(const json& j) {
  reject_unknown(j, "augment", {"F", "T", "n_freq_masks", "n_time_masks", "max_shift",
                                "mask_value", "enabled"});
  AugmentPolicy c;
  read(j, "augment", "F", c.freq_mask_width);
  read(j, "augment", "T", c.time_mask_width);
  read(j, "augment", "n_freq_masks", c.n_freq_masks);
  read(j, "augment", "n_time_masks", c.n_time_masks);
  read(j, "augment", "max_shift", c.max_shift);
  read(j, "augment", "mask_value", c.mask_value);
  read(j, "augment", "enabled", c.enabled);
  return c;
}

HRNetConfig model_from_json(const json& j) {
  reject_unknown(j, "model", {"in_frames", "in_mels", "stem_channels", "n_stages",
                              "branch_channels", "blocks_per_branch", "n_classes",
                              "fuse_channels"});
  HRNetConfig c;
  read(j, "model", "in_frames", c.in_frames);
  read(j, "model", "in_mels", c.in_mels);
  read(j, "model", "stem_channels", c.stem_channels);
  read(j, "model", "n_stages", c.n_stages);
  if (j.contains("branch_channels")) {
    const json& v = j.at("branch_channels");
    if (!v.is_array()) fail(ErrorKind::kInvalidArgument, "model.branch_channels must be an array");
    c.branch_channels.clear();
    for (const json& e : v) {
      if (!e.is_number_unsigned()) {
        fail(ErrorKind::kInvalidArgument, "model.branch_channels entries must be integers");
      }
      c.branch_channels.push_back(e.get<std::size_t>());
    }
  }
  read(j, "model", "blocks_per_branch", c.blocks_per_branch);
  read(j, "model", "n_classes", c.n_classes);
  read(j, "model", "fuse_channels", c.fuse_channels);
  return c;
}

TrainConfig train_from_json(const json& j) {
  reject_unknown(j, "train", {"lr", "beta1", "beta2", "eps_adam", "weight_decay", "epochs",
                              "batch_size", "seed", "eval_every", "micro_batch"});
  TrainConfig c;
  read(j, "train", "lr", c.lr);
  read(j, "train", "beta1", c.beta1);
  read(j, "train", "beta2", c.beta2);
  read(j, "train", "eps_adam", c.eps_adam);
  read(j, "train", "weight_decay", c.weight_decay);
  read(j, "train", "epochs", c.epochs);
  read(j, "train", "batch_size", c.batch_size);
  read(j, "train", "seed", c.seed);
  read(j, "train", "eval_every", c.eval_every);
  read(j, "train", "micro_batch", c.micro_batch);
  return c;
}

DataConfig data_from_json(const json& j) {
  reject_unknown(j, "data", {"manifest", "schema", "n_frames_target", "merge_calm"});
  DataConfig c;
  read(j, "data", "manifest", c.manifest);
  read(j, "data", "schema", c.schema);
  read(j, "data", "n_frames_target", c.n_frames_target);
  read(j, "data", "merge_calm", c.merge_calm);
  return c;
}

EngineConfig engine_from_json(const json& j) {
  reject_unknown(j, "<root>", {"dsp", "augment", "model", "train", "data"});
  const json empty = json::object();
  EngineConfig c;
  c.dsp = dsp_from_json(j.value("dsp", empty));
  c.augment = augment_from_json(j.value("augment", empty));
  c.model = model_from_json(j.value("model", empty));
  c.train = train_from_json(j.value("train", empty));
  c.data = data_from_json(j.value("data", empty));
  c.validate();
  return c;
}

void EngineConfig::validate() const {
  dsp.validate();
  model.validate();
  train.validate();
  require(data.n_frames_target >= 1, "data.n_frames_target must be positive");
  if (model.in_mels != dsp.n_mels) {
    fail(ErrorKind::kInvalidArgument,
         "model.in_mels (" + std::to_string(model.in_mels) + ") must equal dsp.n_mels (" +
             std::to_string(dsp.n_mels) + ")");
  }
  if (model.in_frames != data.n_frames_target) {
    fail(ErrorKind::kInvalidArgument,
         "model.in_frames (" + std::to_string(model.in_frames) +
             ") must equal data.n_frames_target (" +
             std::to_string(data.n_frames_target) + ")");
  }
  const std::size_t classes = schema_by_name(data.effective_schema()).size();
  if (model.n_classes != classes) {
    fail(ErrorKind::kInvalidArgument,
         "model.n_classes (" + std::to_string(model.n_classes) + ") does not match schema " +
             data.effective_schema() + " (" + std::to_string(classes) + " classes)");
  }
  check_policy(augment, dsp.n_mels, data.n_frames_target);
}

EngineConfig parse_engine_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  return engine_from_json(j);
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kNotFound, "cannot open config: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_engine_config(text.str());
}

void apply_override(EngineConfig& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  const std::size_t dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    fail(ErrorKind::kInvalidArgument,
         "override must look like section.key=value: " + std::string(assignment));
  }
  const std::string section(assignment.substr(0, dot));
  const std::string key(assignment.substr(dot + 1, eq - dot - 1));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  json j = to_json(config);
  if (!j.contains(section)) {
    fail(ErrorKind::kInvalidArgument, "unknown config section '" + section + "'");
  }
  if (!j[section].contains(key)) {
    fail(ErrorKind::kInvalidArgument,
         "unknown key '" + key + "' in section '" + section + "'");
  }
  j[section][key] = value;
  config = engine_from_json(j);
}

uint64_t json_hash(const json& j) {
  const std::string text = j.dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ConfigHashes config_hashes(const EngineConfig& config) {
  json train = to_json(config.train);
  train.erase("epochs");
  return {json_hash(to_json(config.model)), json_hash(train), json_hash(to_json(config.dsp))};
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

HRNetConfig desk_model_config(std::size_t in_mels, std::size_t in_frames,
                              std::size_t n_classes) {
  HRNetConfig c;
  c.in_mels = in_mels;
  c.in_frames = in_frames;
  c.stem_channels = 16;
  c.n_stages = 3;
  c.branch_channels = {16, 32, 64};
  c.blocks_per_branch = 1;
  c.n_classes = n_classes;
  c.fuse_channels = 64;
  return c;
}

}  // namespace emohrnet
