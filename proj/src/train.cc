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

#include "train.h"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "error.h"

namespace emohrnet {
namespace {

constexpr uint64_t kInitStream = 0x696e6974ull;        // "init"
constexpr uint64_t kAugmentStream = 0x6175676dull;     // "augm"
constexpr uint64_t kTrainStream = 0x747261696eull;     // "train"

}  // namespace

void TrainConfig::validate() const {
  require(lr > 0.0, "train.lr must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0, "train.beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "train.beta2 must lie in [0, 1)");
  require(eps_adam > 0.0, "train.eps_adam must be positive");
  require(weight_decay >= 0.0, "train.weight_decay must be non-negative");
  require(batch_size >= 1, "train.batch_size must be at least 1");
  require(eval_every >= 1, "train.eval_every must be at least 1");
  require(micro_batch >= 1, "train.micro_batch must be at least 1");
}

AdamState AdamState::zeros_like(const HRNetModel& model) {
  AdamState state;
  for (const NamedTensor& p : model.parameters()) {
    state.m.emplace_back(p.tensor.shape());
    state.v.emplace_back(p.tensor.shape());
  }
  return state;
}

void adam_step(std::span<Tensor* const> params, AdamState& state,
               const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorKind::kInvalidArgument,
         "adam_step: optimizer state holds " + std::to_string(state.m.size()) +
             " tensors for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i];
    if (state.m[i].shape() != p.shape() || state.v[i].shape() != p.shape() ||
        p.grad().size() != p.numel()) {
      fail(ErrorKind::kInvalidArgument,
           "adam_step: shape mismatch for parameter " + std::to_string(i) + " " +
               shape_string(p.shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::span<const double> grad = p.grad();
    std::span<double> w = p.data();
    std::span<double> m = state.m[i].data();
    std::span<double> v = state.v[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = grad[k] + cfg.weight_decay * w[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      w[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
    }
  }
}

void adam_step(HRNetModel& model, AdamState& state, const TrainConfig& cfg) {
  std::vector<Tensor*> params;
  for (NamedTensor& p : model.parameters()) params.push_back(&p.tensor);
  adam_step(params, state, cfg);
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

EvalReport tally(std::span<const std::size_t> truth,
                 std::span<const std::size_t> predicted, std::size_t n_classes) {
  require(truth.size() == predicted.size(), "tally: length mismatch");
  if (truth.empty()) fail(ErrorKind::kInvalidArgument, "cannot evaluate an empty dataset");
  EvalReport report;
  report.n_samples = truth.size();
  report.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] < n_classes && predicted[i] < n_classes, "tally: class out of range");
    ++report.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  double recall_sum = 0.0;
  std::size_t present = 0;
  report.per_class_recall.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t row_total = 0;
    for (std::size_t v : report.confusion[c]) row_total += v;
    if (row_total == 0) continue;
    const double recall =
        static_cast<double>(report.confusion[c][c]) / static_cast<double>(row_total);
    report.per_class_recall[c] = recall;
    recall_sum += recall;
    ++present;
  }
  report.unweighted_accuracy = recall_sum / static_cast<double>(present);
  return report;
}

std::vector<std::size_t> predict(HRNetModel& model, std::span<const Example> data,
                                 std::size_t chunk) {
  const std::size_t k = model.config().n_classes;
  std::vector<std::size_t> out;
  out.reserve(data.size());
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t len = std::min(chunk, data.size() - start);
    indices.resize(len);
    for (std::size_t i = 0; i < len; ++i) indices[i] = start + i;
    const Batch batch = make_batch(data, indices, k);
    Graph g(/*grad_enabled=*/false);
    ModelBinding binding(g, model);
    const Tensor& probs = g.value(forward(binding, g.input(batch.input)));
    for (std::size_t r = 0; r < len; ++r) {
      out.push_back(argmax(probs.data().subspan(r * k, k)));
    }
  }
  return out;
}

EvalReport evaluate(HRNetModel& model, std::span<const Example> data) {
  if (data.empty()) fail(ErrorKind::kInvalidArgument, "cannot evaluate an empty dataset");
  std::vector<std::size_t> truth;
  for (const Example& ex : data) truth.push_back(ex.label);
  const std::vector<std::size_t> predicted = predict(model, data);
  return tally(truth, predicted, model.config().n_classes);
}

std::string format_history_csv(std::span<const HistoryRow> history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_unweighted_acc\n";
  char buf[64];
  for (const HistoryRow& row : history) {
    out << row.epoch << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", row.train_loss);
    out << buf << ',';
    if (row.val_metric) {
      std::snprintf(buf, sizeof(buf), "%.17g", *row.val_metric);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

Checkpoint initial_checkpoint(const HRNetConfig& config, uint64_t seed) {
  Rng rng(seed, kInitStream);
  Checkpoint ckpt{HRNetModel::build(config, rng), {}, 0, std::nullopt,
                  RngState{seed, kTrainStream, 0, 4}, {}, {}, {}};
  ckpt.adam = AdamState::zeros_like(ckpt.model);
  return ckpt;
}

TrainResult train(const Checkpoint& start, std::span<const Example> train_set,
                  std::span<const Example> val_set, const TrainConfig& cfg,
                  const AugmentPolicy& policy,
                  const std::optional<Checkpoint>& best_so_far,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorKind::kInvalidArgument, "training set is empty");
  if (val_set.empty()) fail(ErrorKind::kInvalidArgument, "validation set is empty");
  const std::size_t n_classes = start.model.config().n_classes;
  for (std::span<const Example> set : {train_set, val_set}) {
    for (const Example& ex : set) {
      if (ex.label >= n_classes) {
        fail(ErrorKind::kInvalidArgument,
             "sample " + ex.id + " has class " + std::to_string(ex.label) +
                 " but the model has " + std::to_string(n_classes) + " classes");
      }
    }
  }
  if (policy.enabled) {
    check_policy(policy, train_set[0].features.rows, train_set[0].features.cols);
  }

  TrainResult result;
  Checkpoint state = start;
  state.rng.seed = cfg.seed;
  state.rng.stream = kTrainStream;
  std::optional<Checkpoint> best = best_so_far;
  const std::size_t n = train_set.size();
  std::vector<Example> batch_examples;

  for (std::size_t epoch = start.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(n, cfg.seed, epoch, true);
    const uint64_t epoch_stream = mix_stream(kAugmentStream, epoch);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++batch_index) {
      const std::size_t batch_n = std::min(cfg.batch_size, n - b0);
      batch_examples.clear();
      for (std::size_t i = 0; i < batch_n; ++i) {
        const std::size_t idx = order[b0 + i];
        Example ex = train_set[idx];
        if (policy.enabled) {
          Rng rng(cfg.seed, mix_stream(epoch_stream, idx));
          ex.features = augment(ex.features, policy, rng);
          ++result.augment_calls_train;
        }
        batch_examples.push_back(std::move(ex));
      }

      std::vector<std::vector<double>> accum(state.model.parameters().size());
      double batch_loss = 0.0;
      for (std::size_t c0 = 0; c0 < batch_n; c0 += cfg.micro_batch) {
        const std::size_t chunk_n = std::min(cfg.micro_batch, batch_n - c0);
        std::vector<std::size_t> idx(chunk_n);
        for (std::size_t i = 0; i < chunk_n; ++i) idx[i] = c0 + i;
        const Batch batch = make_batch(batch_examples, idx, n_classes);
        Graph g;
        ModelBinding binding(g, state.model);
        const Var probs = forward(binding, g.input(batch.input));
        const Var loss = cross_entropy(g, probs, batch.labels);
        const double value = g.value(loss).item();
        if (!std::isfinite(value)) {
          fail(ErrorKind::kNumerical,
               "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                   std::to_string(batch_index));
        }
        state.model.clear_grads();
        g.backward(loss);
        const double weight = static_cast<double>(chunk_n) / static_cast<double>(batch_n);
        batch_loss += value * weight;
        std::vector<NamedTensor>& params = state.model.parameters();
        for (std::size_t p = 0; p < params.size(); ++p) {
          std::span<const double> grad = params[p].tensor.grad();
          if (accum[p].empty()) accum[p].assign(grad.size(), 0.0);
          for (std::size_t k = 0; k < grad.size(); ++k) accum[p][k] += grad[k] * weight;
        }
      }
      std::vector<NamedTensor>& params = state.model.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        params[p].tensor.set_grad(std::move(accum[p]));
      }
      adam_step(state.model, state.adam, cfg);
      state.model.clear_grads();
      loss_sum += batch_loss * static_cast<double>(batch_n);
    }

    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n);
    state.epoch = epoch;
    state.rng.counter = epoch;
    if (epoch % cfg.eval_every == 0) {
      // Validation sees clean spectrograms: evaluate() never augments.
      const EvalReport report = evaluate(state.model, val_set);
      row.val_metric = report.unweighted_accuracy;
      state.validation_metric = row.val_metric;
      if (!best || !best->validation_metric ||
          *row.val_metric > *best->validation_metric) {
        state.history.push_back(row);
        best = state;
        state.history.pop_back();
      }
    }
    state.history.push_back(row);
    result.history.push_back(row);
    if (callbacks.on_epoch) callbacks.on_epoch(row);
  }

  result.last = state;
  result.best = best ? *best : state;
  return result;
}

}  // namespace emohrnet
