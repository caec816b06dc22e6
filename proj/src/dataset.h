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

#ifndef EMOHRNET_SRC_DATASET_H_
#define EMOHRNET_SRC_DATASET_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "audio.h"
#include "tensor.h"

namespace emohrnet {

struct LabelSchema {
  std::string corpus;
  std::vector<std::string> labels;  // index == class id

  std::size_t size() const { return labels.size(); }
};

// Known schemas: "ravdess" (8 classes), "ravdess7" (calm merged into
// neutral), "iemocap" (5), "emovo" (7).
LabelSchema schema_by_name(std::string_view name);

struct RavdessInfo {
  std::size_t class_id = 0;
  int modality = 0;
  int vocal_channel = 0;  // 1 speech, 2 song
  int emotion = 0;        // raw field 3, 1..8
  int intensity = 0;
  int statement = 0;
  int repetition = 0;
  int actor = 0;
};

// Parses "MM-VV-EE-II-SS-RR-AA.wav". With merge_calm, calm (02) maps to
// neutral and later emotions shift down by one.
RavdessInfo parse_ravdess_filename(std::string_view name, bool merge_calm = false);

struct EmovoInfo {
  std::size_t class_id = 0;
  std::string speaker;
};

// Parses "<emotion>-<speaker>-<sentence>.wav", e.g. "dis-f1-b1.wav".
EmovoInfo parse_emovo_filename(std::string_view name);

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ManifestRow {
  std::string path;
  std::size_t class_id = 0;
  Split split = Split::kTrain;
  std::string source_id;
  bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
  std::string schema;
  std::vector<ManifestRow> rows;

  std::vector<ManifestRow> split_rows(Split split) const;
  // Unique paths and class ids within the schema.
  void validate() const;
  bool operator==(const Manifest&) const = default;
};

// TSV: path<TAB>class_id<TAB>split<TAB>source_id, '#' comments, and an
// optional "# schema: <name>" line.
std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
// Relative audio paths are resolved against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);

struct SplitPolicy {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  bool speaker_disjoint = true;
};

// Largest-remainder apportionment of n items; ties go to the later split.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitPolicy& policy);

struct ScanOptions {
  bool include_song = true;  // RAVDESS vocal channel 02
};

struct ManifestBuild {
  Manifest manifest;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

ManifestBuild build_manifest(const std::filesystem::path& root,
                             std::string_view schema_name,
                             const SplitPolicy& policy, uint64_t seed,
                             const ScanOptions& options = {});

struct Example {
  std::string id;
  Matrix features;  // n_mels x n_frames_target
  std::size_t label = 0;
};

// Loads every row of `split` through the audio frontend, fitted to
// n_frames_target. Unreadable files are errors.
std::vector<Example> load_examples(const Manifest& manifest, Split split,
                                   const DspConfig& dsp, std::size_t n_frames_target);

// Per-epoch permutation determined by (seed, epoch); identity when
// shuffling is off.
std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, uint64_t epoch,
                                     bool shuffle);

struct Batch {
  Tensor input;   // N x 1 x n_mels x n_frames
  Tensor labels;  // N x K one-hot
  std::vector<std::string> ids;
};

Tensor one_hot(std::span<const std::size_t> labels, std::size_t n_classes);

Batch make_batch(std::span<const Example> examples,
                 std::span<const std::size_t> indices, std::size_t n_classes);

std::vector<Batch> batch_iter(std::span<const Example> examples,
                              std::size_t batch_size, uint64_t seed, uint64_t epoch,
                              bool shuffle, std::size_t n_classes);

std::vector<Batch> batch_iter(const Manifest& manifest, Split split,
                              const DspConfig& dsp, std::size_t n_frames_target,
                              std::size_t batch_size, uint64_t seed, uint64_t epoch,
                              bool shuffle);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_DATASET_H_
