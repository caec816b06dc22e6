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

#include "checkpoint.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "config.h"
#include "error.h"

namespace emohrnet {
namespace {

uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t len = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos),
                static_cast<uInt>(len));
    pos += len;
  }
  return static_cast<uint32_t>(crc);
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t pos) {
  uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

void put_double(std::string& out, double d) {
  put_le<uint64_t>(out, std::bit_cast<uint64_t>(d));
}

double get_double(std::string_view bytes, std::size_t pos) {
  return std::bit_cast<double>(get_le<uint64_t>(bytes, pos));
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_optional_number(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string encode_tensor_file(const TensorFile& file) {
  std::string payload;
  nlohmann::json entries = nlohmann::json::array();
  for (const NamedTensor& t : file.tensors) {
    const std::size_t offset = payload.size();
    for (double d : t.tensor.data()) put_double(payload, d);
    entries.push_back({{"name", t.name},
                       {"shape", t.tensor.shape()},
                       {"offset", offset},
                       {"bytes", payload.size() - offset}});
  }
  nlohmann::json header = {{"kind", file.kind},
                           {"meta", file.meta},
                           {"tensors", entries},
                           {"payload_bytes", payload.size()},
                           {"payload_crc32", crc32_of(payload)}};
  const std::string header_text = header.dump();
  std::string out(kTensorFileMagic, sizeof(kTensorFileMagic));
  put_le<uint32_t>(out, kTensorFileVersion);
  put_le<uint64_t>(out, header_text.size());
  out += header_text;
  put_le<uint32_t>(out, crc32_of(header_text));
  out += payload;
  return out;
}

TensorFile decode_tensor_file(std::string_view bytes) {
  constexpr std::size_t kPrefix = sizeof(kTensorFileMagic) + 4 + 8;
  if (bytes.size() < sizeof(kTensorFileMagic) ||
      std::memcmp(bytes.data(), kTensorFileMagic, sizeof(kTensorFileMagic)) != 0) {
    fail(ErrorKind::kCorruptData, "bad magic: not an EMOHRNET tensor file");
  }
  if (bytes.size() < kPrefix) fail(ErrorKind::kTruncated, "tensor file truncated in preamble");
  const auto version = get_le<uint32_t>(bytes, 8);
  if (version != kTensorFileVersion) {
    fail(ErrorKind::kUnsupported,
         "unsupported tensor file version " + std::to_string(version));
  }
  const auto header_len = get_le<uint64_t>(bytes, 12);
  if (header_len > bytes.size() - kPrefix || bytes.size() - kPrefix - header_len < 4) {
    fail(ErrorKind::kTruncated, "tensor file truncated in header");
  }
  const std::string_view header_text = bytes.substr(kPrefix, header_len);
  const auto header_crc = get_le<uint32_t>(bytes, kPrefix + header_len);
  if (header_crc != crc32_of(header_text)) {
    fail(ErrorKind::kChecksumMismatch, "tensor file header checksum mismatch");
  }
  const std::string_view payload = bytes.substr(kPrefix + header_len + 4);

  TensorFile file;
  try {
    const nlohmann::json header = nlohmann::json::parse(header_text);
    const auto payload_bytes = header.at("payload_bytes").get<uint64_t>();
    if (payload.size() < payload_bytes) {
      fail(ErrorKind::kTruncated,
           "tensor file payload truncated: " + std::to_string(payload.size()) + " of " +
               std::to_string(payload_bytes) + " bytes");
    }
    if (payload.size() > payload_bytes) {
      fail(ErrorKind::kCorruptData, "trailing bytes after tensor payload");
    }
    if (header.at("payload_crc32").get<uint32_t>() != crc32_of(payload)) {
      fail(ErrorKind::kChecksumMismatch, "tensor file payload checksum mismatch");
    }
    file.kind = header.at("kind").get<std::string>();
    file.meta = header.at("meta");
    for (const nlohmann::json& e : header.at("tensors")) {
      const Shape shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<uint64_t>();
      const auto len = e.at("bytes").get<uint64_t>();
      if (len != shape_numel(shape) * 8 || offset > payload.size() ||
          len > payload.size() - offset) {
        fail(ErrorKind::kCorruptData, "tensor entry out of bounds");
      }
      std::vector<double> data(shape_numel(shape));
      for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = get_double(payload, offset + 8 * i);
      }
      file.tensors.push_back({e.at("name").get<std::string>(), Tensor(shape, std::move(data))});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCorruptData, std::string("malformed tensor file header: ") + e.what());
  }
  return file;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kNotFound, "cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kNotFound, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kNotFound, "short write to " + path.string());
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  TensorFile file;
  file.kind = "checkpoint";
  nlohmann::json history = nlohmann::json::array();
  for (const HistoryRow& row : ckpt.history) {
    history.push_back({row.epoch, row.train_loss, optional_number(row.val_metric)});
  }
  file.meta = {
      {"epoch", ckpt.epoch},
      {"validation_metric", optional_number(ckpt.validation_metric)},
      {"rng",
       {{"seed", ckpt.rng.seed},
        {"stream", ckpt.rng.stream},
        {"counter", ckpt.rng.counter},
        {"buffered", ckpt.rng.buffered}}},
      {"config_hashes",
       {{"model", hash_hex(ckpt.hashes.model)},
        {"train", hash_hex(ckpt.hashes.train)},
        {"dsp", hash_hex(ckpt.hashes.dsp)}}},
      {"adam_step", ckpt.adam.step},
      {"history", history},
      {"model_config", to_json(ckpt.model.config())},
      {"config", ckpt.config_json.empty() ? nlohmann::json(nullptr)
                                          : nlohmann::json::parse(ckpt.config_json)},
  };
  const std::vector<NamedTensor>& params = ckpt.model.parameters();
  for (const NamedTensor& p : params) {
    file.tensors.push_back({"param/" + p.name, Tensor(p.tensor.shape(), std::vector<double>(
                                                        p.tensor.data().begin(),
                                                        p.tensor.data().end()))});
  }
  for (std::size_t i = 0; i < ckpt.adam.m.size(); ++i) {
    file.tensors.push_back({"adam_m/" + params[i].name, ckpt.adam.m[i]});
  }
  for (std::size_t i = 0; i < ckpt.adam.v.size(); ++i) {
    file.tensors.push_back({"adam_v/" + params[i].name, ckpt.adam.v[i]});
  }
  return encode_tensor_file(file);
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  TensorFile file = decode_tensor_file(bytes);
  if (file.kind != "checkpoint") {
    fail(ErrorKind::kCorruptData, "tensor file kind '" + file.kind + "' is not a checkpoint");
  }
  Checkpoint ckpt;
  try {
    const nlohmann::json& meta = file.meta;
    const HRNetConfig model_config = model_from_json(meta.at("model_config"));
    Rng unused(0, 0);
    ckpt.model = HRNetModel::build(model_config, unused);
    ckpt.adam = AdamState::zeros_like(ckpt.model);
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.validation_metric = read_optional_number(meta.at("validation_metric"));
    const nlohmann::json& rng = meta.at("rng");
    ckpt.rng = RngState{rng.at("seed").get<uint64_t>(), rng.at("stream").get<uint64_t>(),
                        rng.at("counter").get<uint64_t>(), rng.at("buffered").get<uint32_t>()};
    const nlohmann::json& hashes = meta.at("config_hashes");
    auto parse_hex = [](const nlohmann::json& j) {
      return std::stoull(j.get<std::string>(), nullptr, 16);
    };
    ckpt.hashes = {parse_hex(hashes.at("model")), parse_hex(hashes.at("train")),
                   parse_hex(hashes.at("dsp"))};
    ckpt.adam.step = meta.at("adam_step").get<uint64_t>();
    for (const nlohmann::json& row : meta.at("history")) {
      ckpt.history.push_back({row.at(0).get<std::size_t>(), row.at(1).get<double>(),
                              read_optional_number(row.at(2))});
    }
    if (!meta.at("config").is_null()) ckpt.config_json = meta.at("config").dump();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCorruptData, std::string("malformed checkpoint metadata: ") + e.what());
  }

  std::vector<NamedTensor>& params = ckpt.model.parameters();
  const std::size_t n = params.size();
  if (file.tensors.size() != 3 * n) {
    fail(ErrorKind::kCorruptData,
         "checkpoint holds " + std::to_string(file.tensors.size()) + " tensors, expected " +
             std::to_string(3 * n));
  }
  auto take = [&](std::size_t slot, const std::string& name, Tensor& dst) {
    NamedTensor& src = file.tensors[slot];
    if (src.name != name || src.tensor.shape() != dst.shape()) {
      fail(ErrorKind::kCorruptData,
           "checkpoint tensor '" + src.name + "' does not match expected '" + name + "' " +
               shape_string(dst.shape()));
    }
    const bool requires_grad = dst.requires_grad();
    dst = std::move(src.tensor);
    dst.set_requires_grad(requires_grad);
  };
  for (std::size_t i = 0; i < n; ++i) take(i, "param/" + params[i].name, params[i].tensor);
  for (std::size_t i = 0; i < n; ++i) take(n + i, "adam_m/" + params[i].name, ckpt.adam.m[i]);
  for (std::size_t i = 0; i < n; ++i) take(2 * n + i, "adam_v/" + params[i].name, ckpt.adam.v[i]);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

void check_resume_compatible(const Checkpoint& ckpt, const ConfigHashes& current) {
  auto mismatch = [](const char* section, uint64_t saved, uint64_t now) {
    fail(ErrorKind::kConfigMismatch,
         std::string("config hash mismatch in section '") + section + "': checkpoint " +
             hash_hex(saved) + ", current " + hash_hex(now));
  };
  if (ckpt.hashes.model != current.model) mismatch("model", ckpt.hashes.model, current.model);
  if (ckpt.hashes.train != current.train) mismatch("train", ckpt.hashes.train, current.train);
  if (ckpt.hashes.dsp != current.dsp) mismatch("dsp", ckpt.hashes.dsp, current.dsp);
}

}  // namespace emohrnet
