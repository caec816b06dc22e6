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

#ifndef EMOHRNET_SRC_TRAIN_H_
#define EMOHRNET_SRC_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "augment.h"
#include "dataset.h"
#include "hrnet.h"
#include "rng.h"
#include "tensor.h"

namespace emohrnet {

struct TrainConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  double weight_decay = 0.0001;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  uint64_t seed = 0;
  std::size_t eval_every = 1;
  // Samples per autodiff graph; gradients of a batch are accumulated over
  // micro-batches of this size. Bounds memory, not the optimization.
  std::size_t micro_batch = 8;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  uint64_t step = 0;

  static AdamState zeros_like(const HRNetModel& model);
};

// Adam with L2 weight decay coupled into the gradient:
//   g = grad + wd * w; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2
//   w -= lr * m_hat / (sqrt(v_hat) + eps)
// The step counter advances once per call.
void adam_step(std::span<Tensor* const> params, AdamState& state,
               const TrainConfig& cfg);
void adam_step(HRNetModel& model, AdamState& state, const TrainConfig& cfg);

struct EvalReport {
  double unweighted_accuracy = 0.0;  // mean recall over present classes
  double overall_accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::optional<double>> per_class_recall;  // empty if absent
  std::size_t n_samples = 0;
};

// Ties break toward the lowest class index.
std::size_t argmax(std::span<const double> row);
EvalReport tally(std::span<const std::size_t> truth,
                 std::span<const std::size_t> predicted, std::size_t n_classes);
std::vector<std::size_t> predict(HRNetModel& model, std::span<const Example> data,
                                 std::size_t chunk = 8);
EvalReport evaluate(HRNetModel& model, std::span<const Example> data);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_metric;
  bool operator==(const HistoryRow&) const = default;
};

std::string format_history_csv(std::span<const HistoryRow> history);

struct ConfigHashes {
  uint64_t model = 0;
  uint64_t train = 0;
  uint64_t dsp = 0;
  bool operator==(const ConfigHashes&) const = default;
};

struct Checkpoint {
  HRNetModel model;
  AdamState adam;
  std::size_t epoch = 0;  // completed epochs
  std::optional<double> validation_metric;
  RngState rng;
  ConfigHashes hashes;
  std::vector<HistoryRow> history;
  std::string config_json;  // resolved engine config, echoed verbatim
};

// Fresh checkpoint: model built from `seed`, zero optimizer state.
Checkpoint initial_checkpoint(const HRNetConfig& config, uint64_t seed);

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<HistoryRow> history;
  // Instrumentation: augment() invocations inside training batches and
  // inside validation passes. The latter must stay zero.
  std::size_t augment_calls_train = 0;
  std::size_t augment_calls_eval = 0;
};

struct TrainCallbacks {
  std::function<void(const HistoryRow&)> on_epoch;
};

// Runs epochs start.epoch+1 .. cfg.epochs. `best_so_far` carries the best
// checkpoint of a run being resumed.
TrainResult train(const Checkpoint& start, std::span<const Example> train_set,
                  std::span<const Example> val_set, const TrainConfig& cfg,
                  const AugmentPolicy& policy,
                  const std::optional<Checkpoint>& best_so_far = std::nullopt,
                  const TrainCallbacks& callbacks = {});

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_TRAIN_H_
