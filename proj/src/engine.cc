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

#include "engine.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>

#include "error.h"

namespace emohrnet {
namespace {

namespace fs = std::filesystem;

constexpr uint64_t kPreviewStream = 0x70726576ull;     // "prev"
constexpr uint64_t kGradcheckStream = 0x67636865ull;   // "gche"
constexpr uint64_t kProjectionStream = 0x70726f6aull;  // "proj"
constexpr double kGradcheckLogitSpread = 4.0;

std::string number_text(double v) { return nlohmann::json(v).dump(); }

// --- gradcheck helpers -----------------------------------------------------

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

Tensor random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t& l : labels) l = rng.uniform_int(0, k - 1);
  return one_hot(labels, k);
}

// Scalar projection with fixed random weights drawn on first use.
class Projection {
 public:
  explicit Projection(uint64_t seed) : seed_(seed) {}

  Var operator()(Graph& g, Var x) {
    if (!weights_) {
      Rng rng(seed_, kProjectionStream);
      weights_ = random_tensor(g.value(x).shape(), rng);
    }
    return weighted_sum(g, x, *weights_);
  }

 private:
  uint64_t seed_;
  std::optional<Tensor> weights_;
};

GradCheckResult check_op(OpKind op, uint64_t case_seed, const GradcheckOptions& options) {
  Rng rng(options.seed, case_seed);
  GradCheckOptions go;
  go.seed = case_seed;
  go.corrupt_analytic_scale = options.corrupt_analytic_scale;
  Projection project(mix_stream(options.seed, case_seed));
  std::vector<Tensor> owned;
  owned.reserve(3);
  GraphBuilder builder;

  switch (op) {
    case OpKind::kConv2d: {
      const ConvSpec spec{1 + rng.uniform_int(0, 1), rng.uniform_int(0, 1)};
      owned.push_back(random_tensor({2, 2, 5, 6}, rng));
      owned.push_back(random_tensor({3, 2, 3, 3}, rng));
      owned.push_back(random_tensor({3}, rng));
      builder = [&, spec](Graph& g) {
        return project(g, conv2d(g, g.param(owned[0]), g.param(owned[1]),
                                 g.param(owned[2]), spec));
      };
      break;
    }
    case OpKind::kRelu:
      owned.push_back(random_tensor({2, 3, 4}, rng));
      builder = [&](Graph& g) { return project(g, relu(g, g.param(owned[0]))); };
      break;
    case OpKind::kUpsampleNearest: {
      const std::size_t factor = 2 + rng.uniform_int(0, 1);
      const std::size_t h = 3 * factor - rng.uniform_int(0, 1);
      const std::size_t w = 3 * factor - rng.uniform_int(0, 1);
      owned.push_back(random_tensor({1, 2, 3, 3}, rng));
      builder = [&, factor, h, w](Graph& g) {
        return project(g, upsample_nearest(g, g.param(owned[0]), factor, h, w));
      };
      break;
    }
    case OpKind::kAdd:
    case OpKind::kMul:
      owned.push_back(random_tensor({2, 3, 4}, rng));
      owned.push_back(random_tensor({2, 3, 4}, rng));
      builder = [&, op](Graph& g) {
        const Var a = g.param(owned[0]);
        const Var b = g.param(owned[1]);
        return project(g, op == OpKind::kAdd ? add(g, a, b) : mul(g, a, b));
      };
      break;
    case OpKind::kGlobalAvgPool:
      owned.push_back(random_tensor({2, 3, 4, 5}, rng));
      builder = [&](Graph& g) { return project(g, global_avg_pool(g, g.param(owned[0]))); };
      break;
    case OpKind::kLinear:
      owned.push_back(random_tensor({3, 4}, rng));
      owned.push_back(random_tensor({5, 4}, rng));
      owned.push_back(random_tensor({5}, rng));
      builder = [&](Graph& g) {
        return project(g, linear(g, g.param(owned[0]), g.param(owned[1]), g.param(owned[2])));
      };
      break;
    case OpKind::kSoftmax:
      owned.push_back(random_tensor({3, 4}, rng, 2.0));
      builder = [&](Graph& g) { return project(g, softmax(g, g.param(owned[0]))); };
      break;
    case OpKind::kCrossEntropy: {
      const Tensor labels = random_labels(3, 4, rng);
      if (case_seed % 2 == 0) {
        // Fused path: gradient routed to the logits.
        owned.push_back(random_tensor({3, 4}, rng, 2.0));
        builder = [&, labels](Graph& g) {
          return cross_entropy(g, softmax(g, g.param(owned[0])), labels);
        };
      } else {
        Tensor probs({3, 4});
        for (double& v : probs.data()) v = 0.2 + 0.8 * rng.uniform01();
        owned.push_back(std::move(probs));
        builder = [&, labels](Graph& g) { return cross_entropy(g, g.param(owned[0]), labels); };
      }
      break;
    }
    case OpKind::kWeightedSum: {
      owned.push_back(random_tensor({2, 3}, rng));
      const Tensor weights = random_tensor({2, 3}, rng);
      builder = [&, weights](Graph& g) { return weighted_sum(g, g.param(owned[0]), weights); };
      break;
    }
    case OpKind::kLeaf:
      fail(ErrorKind::kInvalidArgument, "leaf is not a differentiable op");
  }
  std::vector<Tensor*> inputs;
  for (Tensor& t : owned) inputs.push_back(&t);
  return grad_check(builder, inputs, options.eps, go);
}

std::vector<Tensor*> params_with_prefix(HRNetModel& model, std::string_view prefix) {
  std::vector<Tensor*> out;
  for (NamedTensor& p : model.parameters()) {
    if (p.name.compare(0, prefix.size(), prefix) == 0) out.push_back(&p.tensor);
  }
  return out;
}

std::vector<Tensor> random_branches(const HRNetConfig& cfg, std::size_t n_branches,
                                    std::size_t batch, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t r = 0; r < n_branches; ++r) {
    out.push_back(random_tensor({batch, cfg.branch_channels[r],
                                 branch_extent(cfg.in_mels, r),
                                 branch_extent(cfg.in_frames, r)},
                                rng));
  }
  return out;
}

// Largest within-row logit spread of the model on `mel`.
double logit_spread(HRNetModel& model, const Tensor& mel) {
  Graph g(/*grad_enabled=*/false);
  ModelBinding b(g, model);
  const ForwardTrace trace = forward_trace(b, g.input(mel));
  const ModelLayout& layout = model.layout();
  const Tensor& z = g.value(linear(g, global_avg_pool(g, trace.fused),
                                   b.param(layout.head_weight), b.param(layout.head_bias)));
  const std::size_t k = z.dim(1);
  double spread = 0.0;
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    const auto row = z.data().subspan(r * k, k);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    spread = std::max(spread, *hi - *lo);
  }
  return spread;
}

// Freshly built models have zero biases and are positively homogeneous in
// their input, so scaling the input scales the logits. Keeping the spread
// moderate avoids the saturated softmax regime where the probability floor
// of cross_entropy is active and the loss is not differentiable.
void scale_to_logit_spread(HRNetModel& model, Tensor& mel, double target) {
  const double spread = logit_spread(model, mel);
  if (!(spread > target)) return;
  const double s = target / spread;
  for (double& v : mel.data()) v *= s;
}

GradcheckRow to_row(std::string name, const GradCheckResult& r, double tolerance) {
  return {std::move(name), r.max_rel_error, r.checked, r.skipped,
          r.checked > 0 && r.max_rel_error < tolerance};
}

void merge(GradCheckResult& into, const GradCheckResult& r) {
  into.max_rel_error = std::max(into.max_rel_error, r.max_rel_error);
  into.checked += r.checked;
  into.skipped += r.skipped;
}

}  // namespace

// --- preprocess ------------------------------------------------------------

std::string cache_file_name(std::size_t index, const ManifestRow& row) {
  char prefix[32];
  std::snprintf(prefix, sizeof(prefix), "%06zu-", index);
  return prefix + fs::path(row.path).stem().string() + ".mel";
}

std::string encode_mel_cache(const MelSpectrogram& mel, const ManifestRow& row) {
  TensorFile file;
  file.kind = "mel";
  file.meta = {{"source_id", mel.source_id},
               {"path", row.path},
               {"class_id", row.class_id},
               {"split", std::string(split_name(row.split))},
               {"dsp", to_json(mel.config)}};
  file.tensors.push_back(
      {"mel", Tensor({mel.values.rows, mel.values.cols}, mel.values.data)});
  return encode_tensor_file(file);
}

MelSpectrogram decode_mel_cache(std::string_view bytes) {
  TensorFile file = decode_tensor_file(bytes);
  if (file.kind != "mel" || file.tensors.size() != 1 ||
      file.tensors[0].tensor.rank() != 2) {
    fail(ErrorKind::kCorruptData, "not a mel-spectrogram cache file");
  }
  MelSpectrogram mel;
  const Tensor& t = file.tensors[0].tensor;
  mel.values = Matrix(t.dim(0), t.dim(1));
  mel.values.data.assign(t.data().begin(), t.data().end());
  try {
    mel.config = dsp_from_json(file.meta.at("dsp"));
    mel.source_id = file.meta.at("source_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCorruptData, std::string("malformed cache metadata: ") + e.what());
  }
  return mel;
}

PreprocessSummary run_preprocess(const EngineConfig& config, const fs::path& out_dir) {
  config.dsp.validate();
  if (config.data.manifest.empty()) {
    fail(ErrorKind::kInvalidArgument, "data.manifest is not set");
  }
  const Manifest manifest = read_manifest(config.data.manifest);
  if (manifest.rows.empty()) {
    fail(ErrorKind::kInvalidArgument, "manifest " + config.data.manifest + " has no rows");
  }
  manifest.validate();
  fs::create_directories(out_dir);

  PreprocessSummary summary;
  summary.n_mels = config.dsp.n_mels;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n_values = 0;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const ManifestRow& row = manifest.rows[i];
    const MelSpectrogram mel = mel_spectrogram(load_wav(row.path), config.dsp, row.source_id);
    const fs::path path = out_dir / cache_file_name(i, row);
    write_file_bytes(path, encode_mel_cache(mel, row));
    summary.files.push_back(path);

    const std::size_t frames = mel.values.cols;
    summary.min_frames = i == 0 ? frames : std::min(summary.min_frames, frames);
    summary.max_frames = std::max(summary.max_frames, frames);
    for (double v : mel.values.data) {
      if (n_values == 0) summary.min_value = summary.max_value = v;
      summary.min_value = std::min(summary.min_value, v);
      summary.max_value = std::max(summary.max_value, v);
      sum += v;
      sum_sq += v * v;
      ++n_values;
    }
  }
  summary.count = manifest.rows.size();
  if (n_values > 0) {
    summary.mean = sum / static_cast<double>(n_values);
    summary.stddev = std::sqrt(
        std::max(0.0, sum_sq / static_cast<double>(n_values) - summary.mean * summary.mean));
  }
  const nlohmann::json report = {
      {"count", summary.count},
      {"n_mels", summary.n_mels},
      {"min_frames", summary.min_frames},
      {"max_frames", summary.max_frames},
      {"mean", summary.mean},
      {"stddev", summary.stddev},
      {"min", summary.min_value},
      {"max", summary.max_value},
      {"config", to_json(config)},
  };
  write_file_bytes(out_dir / "summary.json", report.dump(2) + "\n");
  return summary;
}

std::string format_preprocess_summary(const PreprocessSummary& s) {
  std::ostringstream out;
  out << "cached " << s.count << " spectrograms\n"
      << "shape " << s.n_mels << " x [" << s.min_frames << ", " << s.max_frames << "]\n"
      << "mean " << number_text(s.mean) << " std " << number_text(s.stddev) << " min "
      << number_text(s.min_value) << " max " << number_text(s.max_value) << "\n";
  return out.str();
}

// --- augment-preview -------------------------------------------------------

PreviewImages make_preview(const MelSpectrogram& mel, const AugmentPolicy& policy,
                           uint64_t seed) {
  PreviewImages out;
  out.original = mel.values;
  Rng rng(seed, kPreviewStream);
  out.augmented = augment(out.original, policy, rng, &out.trace);
  out.difference = Matrix(out.original.rows, out.original.cols);
  for (std::size_t i = 0; i < out.difference.data.size(); ++i) {
    out.difference.data[i] = std::abs(out.augmented.data[i] - out.original.data[i]);
  }
  return out;
}

std::string encode_pgm(const Matrix& m) {
  std::string out = "P5\n" + std::to_string(m.cols) + " " + std::to_string(m.rows) + "\n255\n";
  double lo = 0.0, hi = 0.0;
  if (!m.data.empty()) {
    const auto [mn, mx] = std::minmax_element(m.data.begin(), m.data.end());
    lo = *mn;
    hi = *mx;
  }
  const double range = hi - lo;
  for (std::size_t r = m.rows; r-- > 0;) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      const double v = range > 0.0 ? (m.at(r, c) - lo) / range * 255.0 : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
    }
  }
  return out;
}

PreviewImages run_augment_preview(const EngineConfig& config, const fs::path& sample,
                                  uint64_t seed, const fs::path& out_dir) {
  config.dsp.validate();
  MelSpectrogram mel = mel_spectrogram(load_wav(sample), config.dsp, sample.filename().string());
  mel.values = fit_frames(mel.values, config.data.n_frames_target);
  if (config.augment.enabled) {
    check_policy(config.augment, mel.values.rows, mel.values.cols);
  }
  PreviewImages images = make_preview(mel, config.augment, seed);
  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "original.pgm", encode_pgm(images.original));
  write_file_bytes(out_dir / "augmented.pgm", encode_pgm(images.augmented));
  write_file_bytes(out_dir / "difference.pgm", encode_pgm(images.difference));
  return images;
}

// --- train -----------------------------------------------------------------

TrainResult train_with_config(const EngineConfig& config, std::span<const Example> train_set,
                              std::span<const Example> val_set,
                              const std::optional<Checkpoint>& resume_from,
                              const std::optional<Checkpoint>& best_so_far,
                              const TrainCallbacks& callbacks) {
  config.validate();
  for (std::span<const Example> set : {train_set, val_set}) {
    for (const Example& ex : set) {
      if (ex.features.rows != config.model.in_mels ||
          ex.features.cols != config.model.in_frames) {
        fail(ErrorKind::kInvalidArgument,
             "sample " + ex.id + " has features " + std::to_string(ex.features.rows) + "x" +
                 std::to_string(ex.features.cols) + ", model expects " +
                 std::to_string(config.model.in_mels) + "x" +
                 std::to_string(config.model.in_frames));
      }
    }
  }
  const ConfigHashes hashes = config_hashes(config);
  const std::string config_json = to_json(config).dump();

  Checkpoint start = resume_from ? *resume_from
                                 : initial_checkpoint(config.model, config.train.seed);
  if (resume_from) check_resume_compatible(start, hashes);
  start.hashes = hashes;
  start.config_json = config_json;
  std::optional<Checkpoint> best = best_so_far;
  if (best) {
    check_resume_compatible(*best, hashes);
    best->config_json = config_json;
  }
  return train(start, train_set, val_set, config.train, config.augment, best, callbacks);
}

TrainResult run_train(const EngineConfig& config, const fs::path& out_dir,
                      const TrainCommandOptions& options) {
  config.validate();
  if (config.data.manifest.empty()) {
    fail(ErrorKind::kInvalidArgument, "data.manifest is not set");
  }
  const Manifest manifest = read_manifest(config.data.manifest);
  if (!manifest.schema.empty() && manifest.schema != config.data.effective_schema()) {
    fail(ErrorKind::kConfigMismatch,
         "manifest schema '" + manifest.schema + "' does not match config schema '" +
             config.data.effective_schema() + "'");
  }
  manifest.validate();
  const std::vector<Example> train_set =
      load_examples(manifest, Split::kTrain, config.dsp, config.data.n_frames_target);
  const std::vector<Example> val_set =
      load_examples(manifest, Split::kVal, config.dsp, config.data.n_frames_target);

  std::optional<Checkpoint> resume_from;
  std::optional<Checkpoint> best_so_far;
  if (options.resume) {
    resume_from = load_checkpoint(*options.resume);
    const fs::path sibling = options.resume->parent_path() / "best.ckpt";
    if (fs::exists(sibling)) best_so_far = load_checkpoint(sibling);
  }
  TrainResult result = train_with_config(config, train_set, val_set, resume_from,
                                         best_so_far, options.callbacks);

  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "resolved-config.json", to_json(config).dump(2) + "\n");
  save_checkpoint(result.best, out_dir / "best.ckpt");
  save_checkpoint(result.last, out_dir / "last.ckpt");
  write_file_bytes(out_dir / "history.csv", format_history_csv(result.last.history));
  return result;
}

// --- eval ------------------------------------------------------------------

nlohmann::json eval_report_json(const EvalReport& report,
                                const std::vector<std::string>& labels,
                                std::string_view split) {
  nlohmann::json recall = nlohmann::json::array();
  for (const std::optional<double>& r : report.per_class_recall) {
    recall.push_back(r ? nlohmann::json(*r) : nlohmann::json(nullptr));
  }
  return {{"split", std::string(split)},
          {"n_samples", report.n_samples},
          {"unweighted_accuracy", report.unweighted_accuracy},
          {"overall_accuracy", report.overall_accuracy},
          {"labels", labels},
          {"confusion", report.confusion},
          {"per_class_recall", recall}};
}

std::string format_confusion_table(const EvalReport& report,
                                   const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "unweighted_accuracy " << number_text(report.unweighted_accuracy) << "\n"
      << "overall_accuracy " << number_text(report.overall_accuracy) << "\n"
      << "n_samples " << report.n_samples << "\n\n";
  std::size_t width = std::string("true\\pred").size();
  for (const std::string& l : labels) width = std::max(width, l.size());
  for (const auto& row : report.confusion) {
    for (std::size_t v : row) width = std::max(width, std::to_string(v).size());
  }
  auto cell = [&](const std::string& s) {
    out << std::string(width - s.size() + 1, ' ') << s;
  };
  cell("true\\pred");
  for (const std::string& l : labels) cell(l);
  out << "\n";
  for (std::size_t r = 0; r < report.confusion.size(); ++r) {
    cell(r < labels.size() ? labels[r] : std::to_string(r));
    for (std::size_t v : report.confusion[r]) cell(std::to_string(v));
    out << "\n";
  }
  return out.str();
}

EvalOutput run_eval(const EngineConfig& config, const fs::path& checkpoint, Split split) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  if (config.data.manifest.empty()) {
    fail(ErrorKind::kInvalidArgument, "data.manifest is not set");
  }
  const LabelSchema schema = schema_by_name(config.data.effective_schema());
  const HRNetConfig& model = ckpt.model.config();
  if (schema.size() != model.n_classes) {
    fail(ErrorKind::kConfigMismatch,
         "checkpoint has " + std::to_string(model.n_classes) + " classes but schema '" +
             config.data.effective_schema() + "' has " + std::to_string(schema.size()));
  }
  if (config_hashes(config).dsp != ckpt.hashes.dsp) {
    fail(ErrorKind::kConfigMismatch, "dsp config differs from the checkpoint's");
  }
  if (config.data.n_frames_target != model.in_frames || config.dsp.n_mels != model.in_mels) {
    fail(ErrorKind::kConfigMismatch, "input dims differ from the checkpoint's model");
  }
  const Manifest manifest = read_manifest(config.data.manifest);
  if (!manifest.schema.empty() && manifest.schema != config.data.effective_schema()) {
    fail(ErrorKind::kConfigMismatch,
         "manifest schema '" + manifest.schema + "' does not match '" +
             config.data.effective_schema() + "'");
  }
  manifest.validate();
  const std::vector<Example> data =
      load_examples(manifest, split, config.dsp, config.data.n_frames_target);

  EvalOutput out;
  out.report = evaluate(ckpt.model, data);
  out.labels = schema.labels;
  out.split = std::string(split_name(split));
  out.json = eval_report_json(out.report, out.labels, out.split);
  out.table = format_confusion_table(out.report, out.labels);
  return out;
}

// --- gradcheck -------------------------------------------------------------

bool GradcheckReport::passed() const {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.passed; });
}

GradcheckReport run_gradcheck(const HRNetConfig& model_config,
                              const GradcheckOptions& options) {
  HRNetConfig cfg = model_config;
  if (options.in_mels != 0) cfg.in_mels = options.in_mels;
  if (options.in_frames != 0) cfg.in_frames = options.in_frames;
  cfg.validate();
  require(options.op_seeds >= 1, "gradcheck needs at least one seed per op");
  GradcheckReport report;

  for (OpKind op : differentiable_ops()) {
    GradCheckResult total;
    for (std::size_t s = 0; s < options.op_seeds; ++s) {
      merge(total, check_op(op, mix_stream(static_cast<uint64_t>(op), s), options));
    }
    report.rows.push_back(to_row("op." + std::string(op_name(op)), total, options.tolerance));
  }

  Rng rng(options.seed, kGradcheckStream);
  HRNetModel model = HRNetModel::build(cfg, rng);
  const std::size_t n = options.model_batch;
  Tensor mel = random_tensor({n, 1, cfg.in_mels, cfg.in_frames}, rng);
  const Tensor labels = random_labels(n, cfg.n_classes, rng);
  scale_to_logit_spread(model, mel, kGradcheckLogitSpread);

  GradCheckOptions go;
  go.seed = options.seed;
  go.max_coords_per_tensor = options.model_coords;
  go.corrupt_analytic_scale = options.corrupt_analytic_scale;

  auto run = [&](std::string name, const GraphBuilder& builder, std::vector<Tensor*> inputs) {
    model.clear_grads();
    const GradCheckResult r = grad_check(builder, inputs, options.eps, go);
    model.clear_grads();
    report.rows.push_back(to_row(std::move(name), r, options.tolerance));
  };

  {
    Projection project(mix_stream(options.seed, 1));
    run("model.hrim",
        [&](Graph& g) {
          ModelBinding b(g, model);
          return project(g, hrim_forward(b, g.input(mel)));
        },
        params_with_prefix(model, "stem"));
  }
  const ModelLayout& layout = model.layout();
  for (std::size_t s = 0; s < layout.stages.size(); ++s) {
    const StageLayout& stage = layout.stages[s];
    if (stage.n_branches < 2) continue;
    std::vector<Tensor> branches = random_branches(cfg, stage.n_branches, n, rng);
    std::vector<Tensor*> inputs = params_with_prefix(
        model, "stage" + std::to_string(s + 1) + ".exchange");
    for (Tensor& t : branches) inputs.push_back(&t);
    Projection project(mix_stream(options.seed, 2 + s));
    run("model.stage" + std::to_string(s + 1) + ".exchange",
        [&](Graph& g) {
          ModelBinding b(g, model);
          BranchSet in;
          for (Tensor& t : branches) in.push_back(g.param(t));
          const BranchSet out = exchange_fuse(b, stage, in);
          Var total = project(g, out[0]);
          for (std::size_t j = 1; j < out.size(); ++j) {
            Projection pj(mix_stream(options.seed, 100 * (s + 1) + j));
            total = add(g, total, pj(g, out[j]));
          }
          return total;
        },
        inputs);
  }
  {
    const std::size_t nb = layout.stages.back().n_branches;
    std::vector<Tensor> branches = random_branches(cfg, nb, n, rng);
    std::vector<Tensor*> inputs = params_with_prefix(model, "fuse.");
    for (Tensor& t : branches) inputs.push_back(&t);
    Projection project(mix_stream(options.seed, 50));
    run("model.fuse",
        [&](Graph& g) {
          ModelBinding b(g, model);
          BranchSet in;
          for (Tensor& t : branches) in.push_back(g.param(t));
          return project(g, fuse_layer(b, in));
        },
        inputs);
  }
  {
    Tensor features = random_tensor({n, cfg.fuse_channels, cfg.in_mels, cfg.in_frames}, rng);
    std::vector<Tensor*> inputs = params_with_prefix(model, "head.");
    inputs.push_back(&features);
    run("model.head",
        [&](Graph& g) {
          ModelBinding b(g, model);
          return cross_entropy(g, head(b, g.param(features)), labels);
        },
        inputs);
  }
  {
    std::vector<Tensor*> inputs;
    for (NamedTensor& p : model.parameters()) inputs.push_back(&p.tensor);
    run("model.full",
        [&](Graph& g) {
          ModelBinding b(g, model);
          return cross_entropy(g, forward(b, g.input(mel)), labels);
        },
        inputs);
  }
  return report;
}

std::string format_gradcheck_report(const GradcheckReport& report) {
  std::ostringstream out;
  char line[256];
  for (const GradcheckRow& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-28s max_rel_err %.3e  checked %6zu  skipped %4zu  %s\n",
                  r.name.c_str(), r.max_rel_error, r.checked, r.skipped,
                  r.passed ? "PASS" : "FAIL");
    out << line;
  }
  out << (report.passed() ? "gradcheck: all checks passed\n" : "gradcheck: FAILED\n");
  return out.str();
}

std::string format_param_manifest(const HRNetConfig& model) {
  Rng rng(0, 0);
  const HRNetModel built = HRNetModel::build(model, rng);
  std::string out;
  for (const ParamInfo& p : built.manifest()) {
    out += p.name + "\t" + shape_string(p.shape) + "\t" +
           std::to_string(shape_numel(p.shape)) + "\n";
  }
  out += "total\t\t" + std::to_string(built.param_count()) + "\n";
  return out;
}

}  // namespace emohrnet
