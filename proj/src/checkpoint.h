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

#ifndef EMOHRNET_SRC_CHECKPOINT_H_
#define EMOHRNET_SRC_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hrnet.h"
#include "train.h"

namespace emohrnet {

// Binary tensor container shared by checkpoints and spectrogram caches:
//
//   "EMOHRNET" | u32 version | u64 header length | UTF-8 JSON header |
//   u32 CRC32 of header | payload
//
// The header lists every tensor (name, shape, byte offset, byte length),
// the payload length and its CRC32, and a kind-specific "meta" object. The
// payload is little-endian float64 data in header order. All integers are
// little-endian.
inline constexpr char kTensorFileMagic[8] = {'E', 'M', 'O', 'H', 'R', 'N', 'E', 'T'};
inline constexpr uint32_t kTensorFileVersion = 1;

struct TensorFile {
  std::string kind;
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;
};

std::string encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(std::string_view bytes);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws kConfigMismatch naming the differing section.
void check_resume_compatible(const Checkpoint& ckpt, const ConfigHashes& current);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_CHECKPOINT_H_
