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


// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance [ravdess_dir [epochs]]
//
// Criterion 8 trains on a user-supplied RAVDESS subset for 30 epochs (or
// `epochs`) and is skipped when no directory is given.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "augment.h"
#include "checkpoint.h"
#include "config.h"
#include "dataset.h"
#include "engine.h"
#include "error.h"
#include "hrnet.h"
#include "rng.h"
#include "tensor.h"
#include "test_util.h"
#include "train.h"

namespace emohrnet {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

enum class Outcome { kPass, kFail, kSkip };

struct Result {
  Outcome outcome = Outcome::kPass;
  std::string detail;
};

// Collects failed sub-checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Result result() const {
    Result r;
    r.outcome = failures_.empty() ? Outcome::kPass : Outcome::kFail;
    const std::vector<std::string>& parts = failures_.empty() ? notes_ : failures_;
    for (const std::string& p : parts) r.detail += (r.detail.empty() ? "" : "; ") + p;
    return r;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = scale * rng.normal();
  return t;
}

// --- 1: gradient checks ----------------------------------------------------

Result gradient_checks() {
  Checks c;
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckReport report = run_gradcheck(desk_model_config(64, 300, 8), {});
  const double elapsed = seconds_since(t0);
  std::set<std::string> ops;
  double worst = 0.0;
  for (const GradcheckRow& r : report.rows) {
    if (r.name.rfind("op.", 0) == 0) ops.insert(r.name.substr(3));
    c.expect(r.passed, r.name + " failed");
    worst = std::max(worst, r.max_rel_error);
  }
  c.expect(ops.size() == differentiable_ops().size(), "op coverage incomplete");
  c.expect(report.passed(), "report not passed");
  c.expect(worst < 1e-4, "max relative error " + fmt("%.3g", worst));
  c.expect(elapsed < 600.0, "took " + fmt("%.0f s", elapsed));
  c.note(std::to_string(report.rows.size()) + " checks, max rel err " + fmt("%.2e", worst) +
         ", " + fmt("%.1f s", elapsed));
  return c.result();
}

// --- 2: closed-form identities ------------------------------------------------

Result closed_form_identities() {
  Checks c;
  Graph g(false);
  Rng rng(2, 0);

  double gap_err = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 2, ch = 3, h = 3 + t, w = 4 + 2 * t;
    const Tensor x = random_tensor({n, ch, h, w}, rng);
    const Tensor& p = g.value(global_avg_pool(g, g.input(x)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < ch; ++k) {
        double s = 0.0;
        for (std::size_t r = 0; r < h; ++r)
          for (std::size_t q = 0; q < w; ++q) s += x[((i * ch + k) * h + r) * w + q];
        gap_err = std::max(gap_err, std::abs(p[i * ch + k] - s / double(h * w)));
      }
  }
  c.expect(gap_err <= 1e-15, "GAP error " + fmt("%.3g", gap_err));

  double row_err = 0.0, shift_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Tensor z = random_tensor({4, 8}, rng, 5.0);
    Tensor shifted = z;
    const double k = 50.0 * rng.normal();
    for (double& v : shifted.storage()) v += k;
    const Tensor& a = g.value(softmax(g, g.input(z)));
    const Tensor& b = g.value(softmax(g, g.input(shifted)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        s += a[r * 8 + j];
        shift_err = std::max(shift_err, std::abs(a[r * 8 + j] - b[r * 8 + j]));
      }
      row_err = std::max(row_err, std::abs(s - 1.0));
    }
  }
  c.expect(row_err <= 1e-12, "softmax row sum error " + fmt("%.3g", row_err));
  c.expect(shift_err <= 1e-12, "softmax shift error " + fmt("%.3g", shift_err));

  const Tensor half({1, 2}, std::vector<double>{0.5, 0.5});
  const Tensor y({1, 2}, std::vector<double>{1.0, 0.0});
  const double ce = g.value(cross_entropy(g, g.input(half), y)).item();
  c.expect(std::abs(ce - std::numbers::ln2) <= 1e-12, "CE(uniform) = " + fmt("%.17g", ce));

  Tensor w = Tensor::scalar(1.0);
  w.set_grad({0.1});
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  std::vector<Tensor*> params = {&w};
  AdamState s;
  s.m.emplace_back(w.shape());
  s.v.emplace_back(w.shape());
  adam_step(params, s, cfg);
  const double want = 1.0 - 0.001 * 0.1 / (std::sqrt(0.01) + 1e-8);
  c.expect(std::abs(s.m[0][0] - 0.01) <= 1e-12, "adam m");
  c.expect(std::abs(s.v[0][0] - 1e-5) <= 1e-12, "adam v");
  c.expect(std::abs(w[0] - want) <= 1e-12, "adam step gives " + fmt("%.17g", w[0]));

  c.note("GAP " + fmt("%.1e", gap_err) + ", softmax " + fmt("%.1e", std::max(row_err, shift_err)) +
         ", CE-ln2 " + fmt("%.1e", std::abs(ce - std::numbers::ln2)) + ", adam " +
         fmt("%.1e", std::abs(w[0] - want)));
  return c.result();
}

// --- 3: DSP ------------------------------------------------------------------

std::vector<double> naive_power(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<double> p(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / n);
      acc += frame[t] * w * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / n);
    }
    p[k] = std::norm(acc);
  }
  return p;
}

Result dsp() {
  Checks c;
  const DspConfig cfg;
  const MelSpectrogram mel = mel_spectrogram(testing::tone({440.0}, 16000), cfg);
  std::vector<double> profile(cfg.n_mels, 0.0);
  for (std::size_t m = 0; m < cfg.n_mels; ++m)
    for (std::size_t f = 0; f < mel.values.cols; ++f) profile[m] += mel.values.at(m, f);
  const std::size_t best = std::max_element(profile.begin(), profile.end()) - profile.begin();
  const std::vector<double> edges = mel_edges_hz(cfg);
  c.expect(edges[best] < 440.0 && 440.0 < edges[best + 2],
           "argmax band " + std::to_string(best) + " does not contain 440 Hz");

  Rng rng(3, 0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Waveform w;
    w.sample_rate = cfg.sample_rate;
    w.samples.resize(cfg.n_fft + 4 * cfg.hop + rng.uniform_int(0, 100));
    for (double& v : w.samples) v = rng.normal();
    const Matrix p = stft_power(w, cfg);
    for (std::size_t f = 0; f < p.cols; ++f) {
      const std::vector<double> frame(w.samples.begin() + f * cfg.hop,
                                      w.samples.begin() + f * cfg.hop + cfg.n_fft);
      const std::vector<double> ref = naive_power(frame);
      for (std::size_t k = 0; k < ref.size(); ++k) {
        worst = std::max(worst, std::abs(p.at(k, f) - ref[k]) / std::abs(ref[k]));
      }
    }
  }
  c.expect(worst <= 1e-9, "STFT relative error " + fmt("%.3g", worst));
  c.note("440 Hz in band " + std::to_string(best) + " [" + fmt("%.1f", edges[best]) + ", " +
         fmt("%.1f", edges[best + 2]) + "] Hz, STFT rel err " + fmt("%.1e", worst));
  return c.result();
}

// --- 4: augmentation ---------------------------------------------------------

bool bit_identical(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

Result augmentation() {
  Checks c;
  const std::size_t n_mels = 64, n_frames = 300, F = 12, T = 30;
  Matrix m(n_mels, n_frames);
  Rng fill(4, 1);
  for (double& v : m.data) v = 1.0 + std::abs(fill.normal());
  AugmentPolicy policy;
  policy.freq_mask_width = F;
  policy.time_mask_width = T;
  Rng rng(4, 0x6d61736b);
  double row_frac = 0.0, col_frac = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Matrix out = augment(m, policy, rng);
    std::size_t rows = 0, cols = 0;
    for (std::size_t r = 0; r < n_mels; ++r) {
      bool all = true;
      for (std::size_t k = 0; k < n_frames && all; ++k) all = out.at(r, k) == 0.0;
      rows += all;
    }
    for (std::size_t k = 0; k < n_frames; ++k) {
      bool all = true;
      for (std::size_t r = 0; r < n_mels && all; ++r) all = out.at(r, k) == 0.0;
      cols += all;
    }
    row_frac += double(rows) / n_mels;
    col_frac += double(cols) / n_frames;
  }
  row_frac /= n;
  col_frac /= n;
  const double row_expect = (F / 2.0) / n_mels, col_expect = (T / 2.0) / n_frames;
  c.expect(std::abs(row_frac - row_expect) <= 0.1 * row_expect,
           "row fraction " + fmt("%.5f", row_frac));
  c.expect(std::abs(col_frac - col_expect) <= 0.1 * col_expect,
           "column fraction " + fmt("%.5f", col_frac));

  AugmentPolicy zero;
  zero.freq_mask_width = 0;
  zero.time_mask_width = 0;
  AugmentPolicy off;
  off.enabled = false;
  bool same = true;
  for (int i = 0; i < 100; ++i) {
    same = same && bit_identical(augment(m, zero, rng), m) && bit_identical(augment(m, off, rng), m);
  }
  c.expect(same, "passthrough not bit-identical");
  c.note("rows " + fmt("%.5f", row_frac) + " vs " + fmt("%.5f", row_expect) + ", columns " +
         fmt("%.5f", col_frac) + " vs " + fmt("%.5f", col_expect));
  return c.result();
}

// --- 5: overfit fixture ------------------------------------------------------

Result overfit() {
  Checks c;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Example> data = testing::fixture_examples();
  const AugmentPolicy policy = testing::fixture_engine_config("unused.tsv", 200).augment;
  const TrainConfig cfg = testing::fixture_train(200);
  const Checkpoint start = initial_checkpoint(testing::fixture_model(2), cfg.seed);
  const TrainResult r = train(start, data, data, cfg, policy);
  const double elapsed = seconds_since(t0);
  std::size_t first_below = 0;
  for (const HistoryRow& row : r.history) {
    if (row.train_loss < 0.01) {
      first_below = row.epoch;
      break;
    }
  }
  HRNetModel model = r.last.model;
  const double uar = evaluate(model, data).unweighted_accuracy;
  c.expect(first_below > 0, "train loss never below 0.01");
  c.expect(r.history.back().train_loss < 0.01,
           "final train loss " + fmt("%.3g", r.history.back().train_loss));
  c.expect(uar == 1.0, "train UAR " + fmt("%.4f", uar));
  c.expect(elapsed < 900.0, "took " + fmt("%.0f s", elapsed));
  c.note("loss < 0.01 from epoch " + std::to_string(first_below) + ", final " +
         fmt("%.2e", r.history.back().train_loss) + ", UAR " + fmt("%.2f", uar) + ", " +
         fmt("%.1f s", elapsed));
  return c.result();
}

// --- 6: determinism, resume, checkpoint integrity ----------------------------

ErrorKind decode_error(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kCheckFailed;
}

Result reproducibility() {
  Checks c;
  TempDir dir("accept6");
  const fs::path manifest = testing::write_fixture_corpus(dir.path(), true);
  const EngineConfig cfg5 = testing::fixture_engine_config(manifest, 5);
  run_train(cfg5, dir / "a");
  run_train(cfg5, dir / "b");
  for (const char* f : {"history.csv", "best.ckpt", "last.ckpt", "resolved-config.json"}) {
    c.expect(read_file_bytes(dir / "a" / f) == read_file_bytes(dir / "b" / f),
             std::string("identical-seed runs differ in ") + f);
  }

  EngineConfig cfg3 = cfg5;
  cfg3.train.epochs = 3;
  run_train(cfg3, dir / "first");
  TrainCommandOptions resume;
  resume.resume = dir / "first" / "last.ckpt";
  run_train(cfg5, dir / "resumed", resume);
  for (const char* f : {"history.csv", "best.ckpt", "last.ckpt"}) {
    c.expect(read_file_bytes(dir / "a" / f) == read_file_bytes(dir / "resumed" / f),
             std::string("train-3 + resume-2 differs in ") + f);
  }

  const std::string bytes = read_file_bytes(dir / "a" / "last.ckpt");
  save_checkpoint(load_checkpoint(dir / "a" / "last.ckpt"), dir / "copy.ckpt");
  c.expect(read_file_bytes(dir / "copy.ckpt") == bytes, "round-trip not byte-identical");

  // Every byte of the preamble and header, then sampled payload bytes,
  // truncations and an appended byte.
  Rng rng(6, 0);
  std::size_t header_end = 0;
  {
    uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 12, sizeof(header_len));
    header_end = 20 + header_len + 4;
  }
  std::size_t trials = 0, missed = 0;
  auto flip = [&](std::size_t pos, unsigned mask) {
    std::string bad = bytes;
    bad[pos] = static_cast<char>(bad[pos] ^ mask);
    ++trials;
    missed += decode_error(bad) == ErrorKind::kCheckFailed;
  };
  for (std::size_t i = 0; i < std::min(header_end, bytes.size()); ++i) {
    flip(i, 1u << rng.uniform_int(0, 7));
  }
  for (int t = 0; t < 2000; ++t) {
    flip(rng.uniform_int(header_end, bytes.size() - 1), 1u << rng.uniform_int(0, 7));
  }
  for (int t = 0; t < 200; ++t) {
    ++trials;
    missed += decode_error(bytes.substr(0, rng.uniform_int(0, bytes.size() - 1))) ==
              ErrorKind::kCheckFailed;
  }
  ++trials;
  missed += decode_error(bytes + '\0') == ErrorKind::kCheckFailed;
  c.expect(missed == 0, std::to_string(missed) + " undetected corruptions");
  c.note("dual run, 3+2 resume and round-trip byte-identical; " + std::to_string(trials) +
         " corruptions detected");
  return c.result();
}

// --- 7: fuse dims ------------------------------------------------------------

Result fuse_dims() {
  Checks c;
  for (std::size_t nb = 1; nb <= 4; ++nb) {
    for (auto [mels, frames] : {std::pair<std::size_t, std::size_t>{64, 300}, {21, 37}}) {
      HRNetConfig cfg;
      cfg.in_mels = mels;
      cfg.in_frames = frames;
      cfg.stem_channels = 4;
      cfg.n_stages = nb;
      cfg.branch_channels.clear();
      for (std::size_t r = 0; r < nb; ++r) cfg.branch_channels.push_back(4 << r);
      cfg.fuse_channels = 8;
      Rng init(7, 0x696e6974);
      HRNetModel model = HRNetModel::build(cfg, init);
      Rng rng(7, 0);
      Graph g(false);
      ModelBinding b(g, model);
      const ForwardTrace t = forward_trace(b, g.input(random_tensor({1, 1, mels, frames}, rng)));
      const Shape& stem = g.value(t.stem).shape();
      const Shape& fused = g.value(t.fused).shape();
      c.expect(t.branches.size() == nb, "branch count");
      c.expect(fused[2] == stem[2] && fused[3] == stem[3],
               std::to_string(nb) + " branches at " + std::to_string(mels) + "x" +
                   std::to_string(frames) + ": fused " + shape_string(fused) + " vs stem " +
                   shape_string(stem));
    }
  }
  c.note("branches 1-4 at 64x300 and 21x37");
  return c.result();
}

// --- 8: RAVDESS subset -------------------------------------------------------

Result ravdess(int argc, char** argv) {
  if (argc < 2) return {Outcome::kSkip, "no RAVDESS directory given"};
  Checks c;
  const fs::path root = argv[1];
  TempDir dir("accept8");
  SplitPolicy policy;
  ManifestBuild build = build_manifest(root, "ravdess", policy, 0);
  std::size_t n_val = 0;
  for (const ManifestRow& r : build.manifest.rows) n_val += r.split == Split::kVal;
  if (n_val == 0) {
    // Too few actors for a speaker-disjoint validation split.
    policy.speaker_disjoint = false;
    build = build_manifest(root, "ravdess", policy, 0);
    c.note("speaker-disjoint split left val empty, used a stratified split");
  }
  std::set<std::string> actors;
  std::set<std::size_t> classes;
  for (const ManifestRow& r : build.manifest.rows) {
    actors.insert(r.source_id.substr(r.source_id.rfind('-') + 1));
    classes.insert(r.class_id);
  }
  c.expect(actors.size() >= 2, "need at least 2 actors, found " + std::to_string(actors.size()));
  c.expect(classes.size() == 8, "need all 8 classes, found " + std::to_string(classes.size()));
  if (c.result().outcome == Outcome::kFail) return c.result();
  write_manifest(dir / "manifest.tsv", build.manifest);

  EngineConfig cfg;
  cfg.data.manifest = (dir / "manifest.tsv").string();
  cfg.train.epochs = argc > 2 ? std::stoul(argv[2]) : 30;
  TrainCommandOptions options;
  options.callbacks.on_epoch = [](const HistoryRow& row) {
    std::printf("  epoch %zu  train_loss %.4f  val_uar %.4f\n", row.epoch, row.train_loss,
                row.val_metric.value_or(-1.0));
    std::fflush(stdout);
  };
  const TrainResult r = run_train(cfg, dir / "run", options);
  const double uar = r.best.validation_metric.value_or(0.0);
  c.expect(uar >= 0.375, "best validation UAR " + fmt("%.4f", uar));
  c.note(std::to_string(build.manifest.rows.size()) + " files, " +
         std::to_string(actors.size()) + " actors, best val UAR " + fmt("%.4f", uar));
  return c.result();
}

}  // namespace
}  // namespace emohrnet

int main(int argc, char** argv) {
  using emohrnet::Outcome;
  using emohrnet::Result;
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria = {
      {"gradient checks", emohrnet::gradient_checks},
      {"closed-form identities", emohrnet::closed_form_identities},
      {"dsp", emohrnet::dsp},
      {"augmentation", emohrnet::augmentation},
      {"overfit fixture", emohrnet::overfit},
      {"reproducibility", emohrnet::reproducibility},
      {"fuse dims", emohrnet::fuse_dims},
      {"ravdess subset", [&] { return emohrnet::ravdess(argc, argv); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {Outcome::kFail, std::string("error: ") + e.what()};
    }
    const char* tag = r.outcome == Outcome::kPass ? "PASS"
                      : r.outcome == Outcome::kSkip ? "SKIP"
                                                    : "FAIL";
    failed += r.outcome == Outcome::kFail;
    std::printf("criterion %zu %s  %s: %s\n", i + 1, tag, criteria[i].first, r.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
