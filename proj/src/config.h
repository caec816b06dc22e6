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

#ifndef EMOHRNET_SRC_CONFIG_H_
#define EMOHRNET_SRC_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "audio.h"
#include "augment.h"
#include "hrnet.h"
#include "train.h"

namespace emohrnet {

using json = nlohmann::json;

struct DataConfig {
  std::string manifest;
  std::string schema = "ravdess";
  std::size_t n_frames_target = 300;
  bool merge_calm = false;  // RAVDESS only: 7-class variant

  // Schema actually used for labels ("ravdess7" when merging calm).
  std::string effective_schema() const;
  bool operator==(const DataConfig&) const = default;
};

// The five sections of an engine config file. Unknown keys are rejected
// and missing keys take the defaults below.
struct EngineConfig {
  DspConfig dsp;
  AugmentPolicy augment;
  HRNetConfig model;
  TrainConfig train;
  DataConfig data;

  // Section-level and cross-section checks (input dims, class count).
  void validate() const;
  bool operator==(const EngineConfig&) const = default;
};

json to_json(const DspConfig& c);
json to_json(const AugmentPolicy& c);
json to_json(const HRNetConfig& c);
json to_json(const TrainConfig& c);
json to_json(const DataConfig& c);
json to_json(const EngineConfig& c);

DspConfig dsp_from_json(const json& j);
AugmentPolicy augment_from_json(const json& j);
HRNetConfig model_from_json(const json& j);
TrainConfig train_from_json(const json& j);
DataConfig data_from_json(const json& j);
EngineConfig engine_from_json(const json& j);

EngineConfig parse_engine_config(std::string_view text);
EngineConfig load_engine_config(const std::filesystem::path& path);

// Applies "section.key=value"; the value is read as JSON when it parses,
// otherwise as a string.
void apply_override(EngineConfig& config, std::string_view assignment);

// FNV-1a 64 over the canonical (sorted-key) JSON dump.
uint64_t json_hash(const json& j);
// Hashes guarding checkpoint resumption. The train hash ignores `epochs`
// so a finished run can be extended.
ConfigHashes config_hashes(const EngineConfig& config);
std::string hash_hex(uint64_t h);

// The desk-scale reference architecture: 3 stages, branches 16/32/64,
// one residual block per branch, stem 16, fuse 64.
HRNetConfig desk_model_config(std::size_t in_mels, std::size_t in_frames,
                              std::size_t n_classes);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_CONFIG_H_
