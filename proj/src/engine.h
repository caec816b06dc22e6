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

#ifndef EMOHRNET_SRC_ENGINE_H_
#define EMOHRNET_SRC_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "augment.h"
#include "checkpoint.h"
#include "config.h"
#include "train.h"

namespace emohrnet {

// preprocess ---------------------------------------------------------------

struct PreprocessSummary {
  std::size_t count = 0;
  std::size_t n_mels = 0;
  std::size_t min_frames = 0;
  std::size_t max_frames = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  std::vector<std::filesystem::path> files;
};

std::string cache_file_name(std::size_t index, const ManifestRow& row);
std::string encode_mel_cache(const MelSpectrogram& mel, const ManifestRow& row);
MelSpectrogram decode_mel_cache(std::string_view bytes);

// Writes one cache file per manifest row plus summary.json into `out_dir`.
PreprocessSummary run_preprocess(const EngineConfig& config,
                                 const std::filesystem::path& out_dir);
std::string format_preprocess_summary(const PreprocessSummary& summary);

// augment-preview -----------------------------------------------------------

struct PreviewImages {
  Matrix original;
  Matrix augmented;
  Matrix difference;  // |augmented - original|
  AugmentTrace trace;
};

PreviewImages make_preview(const MelSpectrogram& mel, const AugmentPolicy& policy,
                           uint64_t seed);
// Binary PGM (P5), 8-bit, min-max scaled; highest mel bin on the top row.
// A constant matrix maps to all zeros.
std::string encode_pgm(const Matrix& m);

// Writes original.pgm, augmented.pgm and difference.pgm.
PreviewImages run_augment_preview(const EngineConfig& config,
                                  const std::filesystem::path& sample,
                                  uint64_t seed, const std::filesystem::path& out_dir);

// train ---------------------------------------------------------------------

struct TrainCommandOptions {
  std::optional<std::filesystem::path> resume;
  TrainCallbacks callbacks;
};

// Trains on the manifest's train split, validates on its val split and
// writes best.ckpt, last.ckpt, history.csv and resolved-config.json.
TrainResult run_train(const EngineConfig& config, const std::filesystem::path& out_dir,
                      const TrainCommandOptions& options = {});

// Core of run_train on in-memory data; stamps config hashes and the
// resolved config into the checkpoints.
TrainResult train_with_config(const EngineConfig& config,
                              std::span<const Example> train_set,
                              std::span<const Example> val_set,
                              const std::optional<Checkpoint>& resume_from = std::nullopt,
                              const std::optional<Checkpoint>& best_so_far = std::nullopt,
                              const TrainCallbacks& callbacks = {});

// eval ----------------------------------------------------------------------

struct EvalOutput {
  EvalReport report;
  std::vector<std::string> labels;
  std::string split;
  nlohmann::json json;
  std::string table;
};

nlohmann::json eval_report_json(const EvalReport& report,
                                const std::vector<std::string>& labels,
                                std::string_view split);
std::string format_confusion_table(const EvalReport& report,
                                   const std::vector<std::string>& labels);

// Evaluates a checkpoint on one split of config.data.manifest. The class
// count of the checkpoint must match the manifest schema.
EvalOutput run_eval(const EngineConfig& config, const std::filesystem::path& checkpoint,
                    Split split);

// gradcheck -----------------------------------------------------------------

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed = false;
};

struct GradcheckOptions {
  uint64_t seed = 0;
  std::size_t op_seeds = 20;
  // Sampled coordinates per parameter tensor in the model-level checks.
  std::size_t model_coords = 3;
  std::size_t model_batch = 2;
  // Input size for the model-level checks; 0 keeps the config's dims.
  std::size_t in_mels = 16;
  std::size_t in_frames = 32;
  double eps = 1e-4;
  double tolerance = 1e-4;
  // Negative-control hook forwarded to grad_check.
  double corrupt_analytic_scale = 1.0;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool passed() const;
};

// Per-op checks for every differentiable op, then HRIM, exchange, fuse,
// head and full-model checks on the architecture of `model`.
GradcheckReport run_gradcheck(const HRNetConfig& model, const GradcheckOptions& options);
std::string format_gradcheck_report(const GradcheckReport& report);

// "name<TAB>shape<TAB>count" per parameter tensor, then the total.
std::string format_param_manifest(const HRNetConfig& model);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_ENGINE_H_
