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

// emohrnet: command-line front end over the C API.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emohrnet/emohrnet.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
};

int report_failure(emohrnet_status status) {
  std::fprintf(stderr, "emohrnet: %s: %s\n", emohrnet_status_name(status),
               emohrnet_last_error());
  return emohrnet_exit_code(status);
}

// Owns a C string handed out by the library.
class OwnedString {
 public:
  OwnedString() = default;
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  ~OwnedString() { emohrnet_string_free(ptr_); }
  char** out() { return &ptr_; }
  const char* get() const { return ptr_ != nullptr ? ptr_ : ""; }

 private:
  char* ptr_ = nullptr;
};

class Config {
 public:
  Config() = default;
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { emohrnet_config_free(ptr_); }
  emohrnet_config** out() { return &ptr_; }
  emohrnet_config* get() const { return ptr_; }

 private:
  emohrnet_config* ptr_ = nullptr;
};

emohrnet_status apply_overrides(const CommonArgs& args, bool seed_sets_train, Config& config) {
  for (const std::string& s : args.overrides) {
    if (emohrnet_status st = emohrnet_config_set(config.get(), s.c_str()); st != EMOHRNET_OK) {
      return st;
    }
  }
  if (seed_sets_train && args.seed) {
    const std::string s = "train.seed=" + std::to_string(*args.seed);
    return emohrnet_config_set(config.get(), s.c_str());
  }
  return EMOHRNET_OK;
}

emohrnet_status load_config(const CommonArgs& args, bool seed_sets_train, Config& config) {
  const emohrnet_status st = args.config_path.empty()
                                 ? emohrnet_config_default(config.out())
                                 : emohrnet_config_load(args.config_path.c_str(), config.out());
  if (st != EMOHRNET_OK) return st;
  return apply_overrides(args, seed_sets_train, config);
}

bool write_text(const std::filesystem::path& path, const char* text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return static_cast<bool>(out);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_seed) {
  cmd->add_option("--config", args.config_path, "engine config JSON");
  cmd->add_option("--set", args.overrides, "override, e.g. train.lr=0.0005")->take_all();
  if (with_seed) cmd->add_option("--seed", args.seed, "64-bit seed");
}

int cmd_preprocess(const CommonArgs& args) {
  Config config;
  if (emohrnet_status st = load_config(args, true, config); st != EMOHRNET_OK) {
    return report_failure(st);
  }
  OwnedString summary;
  if (emohrnet_status st = emohrnet_preprocess(config.get(), args.out_dir.c_str(), summary.out());
      st != EMOHRNET_OK) {
    return report_failure(st);
  }
  std::fputs(summary.get(), stdout);
  return 0;
}

int cmd_augment_preview(const CommonArgs& args, const std::string& sample) {
  Config config;
  if (emohrnet_status st = load_config(args, true, config); st != EMOHRNET_OK) {
    return report_failure(st);
  }
  const uint64_t seed = args.seed.value_or(0);
  if (emohrnet_status st =
          emohrnet_augment_preview(config.get(), sample.c_str(), seed, args.out_dir.c_str());
      st != EMOHRNET_OK) {
    return report_failure(st);
  }
  std::printf("wrote original.pgm, augmented.pgm, difference.pgm to %s\n", args.out_dir.c_str());
  return 0;
}

void print_epoch(void*, uint64_t epoch, double loss, int has_val, double val) {
  if (has_val) {
    std::printf("epoch %llu  train_loss %.6f  val_uar %.4f\n",
                static_cast<unsigned long long>(epoch), loss, val);
  } else {
    std::printf("epoch %llu  train_loss %.6f\n", static_cast<unsigned long long>(epoch), loss);
  }
  std::fflush(stdout);
}

int cmd_train(const CommonArgs& args, const std::string& resume, bool print_params) {
  Config config;
  if (emohrnet_status st = load_config(args, true, config); st != EMOHRNET_OK) {
    return report_failure(st);
  }
  if (print_params) {
    OwnedString manifest;
    if (emohrnet_status st = emohrnet_param_manifest(config.get(), manifest.out());
        st != EMOHRNET_OK) {
      return report_failure(st);
    }
    std::fputs(manifest.get(), stdout);
    return 0;
  }
  if (emohrnet_status st = emohrnet_train(config.get(), args.out_dir.c_str(),
                                          resume.empty() ? nullptr : resume.c_str(),
                                          print_epoch, nullptr);
      st != EMOHRNET_OK) {
    return report_failure(st);
  }
  std::printf("wrote best.ckpt, last.ckpt, history.csv, resolved-config.json to %s\n",
              args.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& split) {
  Config config;
  if (args.config_path.empty()) {
    // Default to the resolved config recorded in the checkpoint.
    emohrnet_checkpoint* ckpt = nullptr;
    emohrnet_status st = emohrnet_checkpoint_load(checkpoint.c_str(), &ckpt);
    if (st == EMOHRNET_OK) st = emohrnet_checkpoint_config(ckpt, config.out());
    emohrnet_checkpoint_free(ckpt);
    if (st == EMOHRNET_OK) st = apply_overrides(args, false, config);
    if (st != EMOHRNET_OK) return report_failure(st);
  } else if (emohrnet_status st = load_config(args, false, config); st != EMOHRNET_OK) {
    return report_failure(st);
  }
  OwnedString report, table;
  if (emohrnet_status st = emohrnet_eval(config.get(), checkpoint.c_str(), split.c_str(),
                                         report.out(), table.out());
      st != EMOHRNET_OK) {
    return report_failure(st);
  }
  if (!args.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    const std::filesystem::path dir(args.out_dir);
    if (ec || !write_text(dir / "eval-report.json", report.get()) ||
        !write_text(dir / "confusion.txt", table.get())) {
      std::fprintf(stderr, "emohrnet: cannot write eval outputs to %s\n", args.out_dir.c_str());
      return 2;
    }
  } else {
    std::fputs(report.get(), stdout);
    std::fputs("\n", stdout);
  }
  std::fputs(table.get(), stdout);
  return 0;
}

int cmd_gradcheck(const CommonArgs& args, uint64_t mels, uint64_t frames,
                  double corrupt_scale) {
  Config config;
  if (emohrnet_status st = load_config(args, false, config); st != EMOHRNET_OK) {
    return report_failure(st);
  }
  OwnedString report;
  const emohrnet_status st =
      emohrnet_gradcheck(config.get(), args.seed.value_or(0), mels, frames,
                         corrupt_scale, report.out());
  std::fputs(report.get(), stdout);
  if (st != EMOHRNET_OK) return report_failure(st);
  return 0;
}

int cmd_manifest(const std::string& root, const std::string& schema, uint64_t seed,
                 bool pooled, const std::string& out_path) {
  OwnedString summary;
  if (emohrnet_status st = emohrnet_manifest_build(root.c_str(), schema.c_str(), seed,
                                                   pooled ? 0 : 1, out_path.c_str(),
                                                   summary.out());
      st != EMOHRNET_OK) {
    return report_failure(st);
  }
  std::fputs(summary.get(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EmoHRNet speech emotion recognition engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", emohrnet_version());

  std::string corpus_root;
  std::string schema = "ravdess";
  std::string manifest_out = "manifest.tsv";
  uint64_t manifest_seed = 0;
  bool pooled = false;
  CLI::App* man = app.add_subcommand("manifest", "build a manifest TSV from a corpus directory");
  man->add_option("root", corpus_root, "corpus directory")->required();
  man->add_option("--schema", schema, "ravdess, ravdess7 or emovo")
      ->check(CLI::IsMember({"ravdess", "ravdess7", "emovo"}));
  man->add_option("--seed", manifest_seed, "64-bit split seed");
  man->add_flag("--pooled", pooled, "mix speakers across splits");
  man->add_option("--out", manifest_out, "manifest path");

  CommonArgs pre_args;
  CLI::App* pre = app.add_subcommand("preprocess", "cache mel spectrograms for a manifest");
  add_common(pre, pre_args, true);
  pre_args.out_dir = "cache";
  pre->add_option("--out", pre_args.out_dir, "cache directory");

  CommonArgs prev_args;
  std::string sample;
  CLI::App* prev = app.add_subcommand("augment-preview", "write original/augmented/difference PGMs");
  add_common(prev, prev_args, true);
  prev_args.out_dir = ".";
  prev->add_option("--out", prev_args.out_dir, "output directory");
  prev->add_option("sample", sample, "WAV file")->required();

  CommonArgs train_args;
  std::string resume;
  CLI::App* tr = app.add_subcommand("train", "train a model");
  add_common(tr, train_args, true);
  train_args.out_dir = "run";
  tr->add_option("--out", train_args.out_dir, "run directory");
  tr->add_option("--resume", resume, "checkpoint to resume from");
  bool print_params = false;
  tr->add_flag("--print-params", print_params, "print the parameter manifest and exit");

  CommonArgs eval_args;
  std::string checkpoint;
  std::string split = "test";
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
  add_common(ev, eval_args, false);
  ev->add_option("--out", eval_args.out_dir, "write eval-report.json and confusion.txt here");
  ev->add_option("--split", split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("checkpoint", checkpoint, "checkpoint file")->required();

  CommonArgs gc_args;
  double corrupt_scale = 1.0;
  uint64_t gc_mels = 16;
  uint64_t gc_frames = 32;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(gc, gc_args, true);
  gc->add_option("--mels", gc_mels, "input mel bins for model-level checks (0: config)");
  gc->add_option("--frames", gc_frames, "input frames for model-level checks (0: config)");
  gc->add_option("--corrupt-gradient", corrupt_scale,
                 "scale analytic gradients by this factor (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*man) return cmd_manifest(corpus_root, schema, manifest_seed, pooled, manifest_out);
  if (*pre) return cmd_preprocess(pre_args);
  if (*prev) return cmd_augment_preview(prev_args, sample);
  if (*tr) return cmd_train(train_args, resume, print_params);
  if (*ev) return cmd_eval(eval_args, checkpoint, split);
  if (*gc) return cmd_gradcheck(gc_args, gc_mels, gc_frames, corrupt_scale);
  return 2;
}
