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

#include "emohrnet/emohrnet.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>
#include <utility>

#include "checkpoint.h"
#include "config.h"
#include "dataset.h"
#include "engine.h"
#include "error.h"

struct emohrnet_config {
  emohrnet::EngineConfig value;
};

struct emohrnet_checkpoint {
  emohrnet::Checkpoint value;
};

namespace {

thread_local std::string g_last_error;

emohrnet_status status_for(emohrnet::ErrorKind kind) {
  using emohrnet::ErrorKind;
  switch (kind) {
    case ErrorKind::kInvalidArgument: return EMOHRNET_ERR_INVALID_ARGUMENT;
    case ErrorKind::kNotFound: return EMOHRNET_ERR_NOT_FOUND;
    case ErrorKind::kUnsupported: return EMOHRNET_ERR_UNSUPPORTED;
    case ErrorKind::kCorruptData: return EMOHRNET_ERR_CORRUPT_DATA;
    case ErrorKind::kTruncated: return EMOHRNET_ERR_TRUNCATED;
    case ErrorKind::kChecksumMismatch: return EMOHRNET_ERR_CHECKSUM_MISMATCH;
    case ErrorKind::kConfigMismatch: return EMOHRNET_ERR_CONFIG_MISMATCH;
    case ErrorKind::kNumerical: return EMOHRNET_ERR_NUMERICAL;
    case ErrorKind::kCheckFailed: return EMOHRNET_ERR_CHECK_FAILED;
  }
  return EMOHRNET_ERR_INTERNAL;
}

template <typename Fn>
emohrnet_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return EMOHRNET_OK;
  } catch (const emohrnet::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return EMOHRNET_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EMOHRNET_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EMOHRNET_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* what) {
  if (p == nullptr) emohrnet::fail(emohrnet::ErrorKind::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

}  // namespace

extern "C" {

const char* emohrnet_version(void) { return "0.1.0"; }

const char* emohrnet_last_error(void) { return g_last_error.c_str(); }

const char* emohrnet_status_name(emohrnet_status status) {
  switch (status) {
    case EMOHRNET_OK: return "ok";
    case EMOHRNET_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EMOHRNET_ERR_NOT_FOUND: return "not found";
    case EMOHRNET_ERR_UNSUPPORTED: return "unsupported";
    case EMOHRNET_ERR_CORRUPT_DATA: return "corrupt data";
    case EMOHRNET_ERR_TRUNCATED: return "truncated";
    case EMOHRNET_ERR_CHECKSUM_MISMATCH: return "checksum mismatch";
    case EMOHRNET_ERR_CONFIG_MISMATCH: return "config mismatch";
    case EMOHRNET_ERR_NUMERICAL: return "numerical error";
    case EMOHRNET_ERR_CHECK_FAILED: return "check failed";
    case EMOHRNET_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

int emohrnet_exit_code(emohrnet_status status) {
  switch (status) {
    case EMOHRNET_OK: return 0;
    case EMOHRNET_ERR_CHECK_FAILED: return 1;
    case EMOHRNET_ERR_NUMERICAL: return 3;
    default: return 2;
  }
}

void emohrnet_string_free(char* s) { std::free(s); }

emohrnet_status emohrnet_config_default(emohrnet_config** out) {
  return guarded([&] {
    require_arg(out, "out");
    *out = new emohrnet_config{};
  });
}

emohrnet_status emohrnet_config_parse(const char* json_text, emohrnet_config** out) {
  return guarded([&] {
    require_arg(json_text, "json_text");
    require_arg(out, "out");
    *out = new emohrnet_config{emohrnet::parse_engine_config(json_text)};
  });
}

emohrnet_status emohrnet_config_load(const char* path, emohrnet_config** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new emohrnet_config{emohrnet::load_engine_config(path)};
  });
}

emohrnet_status emohrnet_config_set(emohrnet_config* config, const char* assignment) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(assignment, "assignment");
    emohrnet::EngineConfig updated = config->value;
    emohrnet::apply_override(updated, assignment);
    config->value = std::move(updated);
  });
}

emohrnet_status emohrnet_config_validate(const emohrnet_config* config) {
  return guarded([&] {
    require_arg(config, "config");
    config->value.validate();
  });
}

emohrnet_status emohrnet_config_to_json(const emohrnet_config* config, char** out) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(out, "out");
    *out = dup_string(emohrnet::to_json(config->value).dump(2) + "\n");
  });
}

void emohrnet_config_free(emohrnet_config* config) { delete config; }

emohrnet_status emohrnet_manifest_build(const char* root, const char* schema,
                                        uint64_t seed, int speaker_disjoint,
                                        const char* out_path, char** summary) {
  return guarded([&] {
    require_arg(root, "root");
    require_arg(schema, "schema");
    require_arg(out_path, "out_path");
    emohrnet::SplitPolicy policy;
    policy.speaker_disjoint = speaker_disjoint != 0;
    const emohrnet::ManifestBuild build = emohrnet::build_manifest(
        std::filesystem::absolute(root), schema, policy, seed);
    emohrnet::write_manifest(out_path, build.manifest);
    std::size_t counts[3] = {0, 0, 0};
    for (const emohrnet::ManifestRow& row : build.manifest.rows) {
      ++counts[static_cast<int>(row.split)];
    }
    std::string text = "wrote " + std::to_string(build.manifest.rows.size()) + " rows (train " +
                       std::to_string(counts[0]) + ", val " + std::to_string(counts[1]) +
                       ", test " + std::to_string(counts[2]) + "), skipped " +
                       std::to_string(build.skipped) + "\n";
    for (const std::string& w : build.warnings) text += "warning: " + w + "\n";
    set_out(summary, text);
  });
}

emohrnet_status emohrnet_param_manifest(const emohrnet_config* config, char** out) {
  return guarded([&] {
    require_arg(config, "config");
    set_out(out, emohrnet::format_param_manifest(config->value.model));
  });
}

emohrnet_status emohrnet_checkpoint_load(const char* path, emohrnet_checkpoint** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new emohrnet_checkpoint{emohrnet::load_checkpoint(path)};
  });
}

emohrnet_status emohrnet_checkpoint_save(const emohrnet_checkpoint* ckpt, const char* path) {
  return guarded([&] {
    require_arg(ckpt, "checkpoint");
    require_arg(path, "path");
    emohrnet::save_checkpoint(ckpt->value, path);
  });
}

uint64_t emohrnet_checkpoint_epoch(const emohrnet_checkpoint* ckpt) {
  return ckpt == nullptr ? 0 : ckpt->value.epoch;
}

int emohrnet_checkpoint_metric(const emohrnet_checkpoint* ckpt, double* out) {
  if (ckpt == nullptr || !ckpt->value.validation_metric) return 0;
  if (out != nullptr) *out = *ckpt->value.validation_metric;
  return 1;
}

uint64_t emohrnet_checkpoint_param_count(const emohrnet_checkpoint* ckpt) {
  return ckpt == nullptr ? 0 : ckpt->value.model.param_count();
}

emohrnet_status emohrnet_checkpoint_config(const emohrnet_checkpoint* ckpt,
                                           emohrnet_config** out) {
  return guarded([&] {
    require_arg(ckpt, "checkpoint");
    require_arg(out, "out");
    if (ckpt->value.config_json.empty()) {
      emohrnet::fail(emohrnet::ErrorKind::kNotFound, "checkpoint carries no config");
    }
    *out = new emohrnet_config{emohrnet::parse_engine_config(ckpt->value.config_json)};
  });
}

void emohrnet_checkpoint_free(emohrnet_checkpoint* ckpt) { delete ckpt; }

emohrnet_status emohrnet_preprocess(const emohrnet_config* config, const char* out_dir,
                                    char** summary_text) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(out_dir, "out_dir");
    const emohrnet::PreprocessSummary summary =
        emohrnet::run_preprocess(config->value, out_dir);
    set_out(summary_text, emohrnet::format_preprocess_summary(summary));
  });
}

emohrnet_status emohrnet_augment_preview(const emohrnet_config* config,
                                         const char* sample_path, uint64_t seed,
                                         const char* out_dir) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(sample_path, "sample_path");
    require_arg(out_dir, "out_dir");
    emohrnet::run_augment_preview(config->value, sample_path, seed, out_dir);
  });
}

emohrnet_status emohrnet_train(const emohrnet_config* config, const char* out_dir,
                               const char* resume_path, emohrnet_epoch_fn on_epoch,
                               void* user) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(out_dir, "out_dir");
    emohrnet::TrainCommandOptions options;
    if (resume_path != nullptr) options.resume = resume_path;
    if (on_epoch != nullptr) {
      options.callbacks.on_epoch = [on_epoch, user](const emohrnet::HistoryRow& row) {
        on_epoch(user, row.epoch, row.train_loss, row.val_metric ? 1 : 0,
                 row.val_metric.value_or(0.0));
      };
    }
    emohrnet::run_train(config->value, out_dir, options);
  });
}

emohrnet_status emohrnet_eval(const emohrnet_config* config, const char* checkpoint_path,
                              const char* split, char** report_json, char** table_text) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(checkpoint_path, "checkpoint_path");
    require_arg(split, "split");
    const emohrnet::EvalOutput out = emohrnet::run_eval(
        config->value, checkpoint_path, emohrnet::parse_split(split));
    set_out(report_json, out.json.dump(2) + "\n");
    set_out(table_text, out.table);
  });
}

emohrnet_status emohrnet_gradcheck(const emohrnet_config* config, uint64_t seed,
                                   uint64_t in_mels, uint64_t in_frames,
                                   double corrupt_scale, char** report_text) {
  return guarded([&] {
    require_arg(config, "config");
    emohrnet::GradcheckOptions options;
    options.seed = seed;
    options.in_mels = in_mels;
    options.in_frames = in_frames;
    options.corrupt_analytic_scale = corrupt_scale;
    const emohrnet::GradcheckReport report =
        emohrnet::run_gradcheck(config->value.model, options);
    set_out(report_text, emohrnet::format_gradcheck_report(report));
    if (!report.passed()) {
      emohrnet::fail(emohrnet::ErrorKind::kCheckFailed, "one or more gradient checks failed");
    }
  });
}

}  // extern "C"
