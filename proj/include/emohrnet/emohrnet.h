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

/* C interface to the EmoHRNet speech emotion recognition engine.
 *
 * Every call returns an emohrnet_status. On failure a description is
 * available from emohrnet_last_error() until the next call on the same
 * thread. Strings returned through char** out-parameters are owned by the
 * caller and released with emohrnet_string_free().
 */

#ifndef EMOHRNET_EMOHRNET_H_
#define EMOHRNET_EMOHRNET_H_

#include <stdint.h>

#if defined(_WIN32)
#define EMOHRNET_API __declspec(dllexport)
#else
#define EMOHRNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emohrnet_status {
  EMOHRNET_OK = 0,
  EMOHRNET_ERR_INVALID_ARGUMENT = 1,
  EMOHRNET_ERR_NOT_FOUND = 2,
  EMOHRNET_ERR_UNSUPPORTED = 3,
  EMOHRNET_ERR_CORRUPT_DATA = 4,
  EMOHRNET_ERR_TRUNCATED = 5,
  EMOHRNET_ERR_CHECKSUM_MISMATCH = 6,
  EMOHRNET_ERR_CONFIG_MISMATCH = 7,
  EMOHRNET_ERR_NUMERICAL = 8,
  EMOHRNET_ERR_CHECK_FAILED = 9,
  EMOHRNET_ERR_INTERNAL = 10
} emohrnet_status;

typedef struct emohrnet_config emohrnet_config;
typedef struct emohrnet_checkpoint emohrnet_checkpoint;

EMOHRNET_API const char* emohrnet_version(void);
EMOHRNET_API const char* emohrnet_last_error(void);
EMOHRNET_API const char* emohrnet_status_name(emohrnet_status status);
/* Process exit code for a status: 0 success, 1 check failure, 2 input or
 * config error, 3 numerical abort. */
EMOHRNET_API int emohrnet_exit_code(emohrnet_status status);
EMOHRNET_API void emohrnet_string_free(char* s);

/* Engine configuration (sections dsp, augment, model, train, data). */
EMOHRNET_API emohrnet_status emohrnet_config_default(emohrnet_config** out);
EMOHRNET_API emohrnet_status emohrnet_config_parse(const char* json_text,
                                                   emohrnet_config** out);
EMOHRNET_API emohrnet_status emohrnet_config_load(const char* path,
                                                  emohrnet_config** out);
/* Applies "section.key=value". */
EMOHRNET_API emohrnet_status emohrnet_config_set(emohrnet_config* config,
                                                 const char* assignment);
EMOHRNET_API emohrnet_status emohrnet_config_validate(const emohrnet_config* config);
/* Fully defaulted config as pretty-printed JSON. */
EMOHRNET_API emohrnet_status emohrnet_config_to_json(const emohrnet_config* config,
                                                     char** out);
EMOHRNET_API void emohrnet_config_free(emohrnet_config* config);

/* Scans `root` for WAV files named by the corpus convention of `schema`
 * ("ravdess", "ravdess7" or "emovo"), assigns 70/15/15 train/val/test splits
 * from `seed` (speaker-disjoint when requested and possible) and writes the
 * manifest TSV to `out_path`. The summary lists split sizes and warnings. */
EMOHRNET_API emohrnet_status emohrnet_manifest_build(const char* root, const char* schema,
                                                     uint64_t seed, int speaker_disjoint,
                                                     const char* out_path, char** summary);

/* Named parameter shapes of the config's model, one per line, then the
 * total parameter count. */
EMOHRNET_API emohrnet_status emohrnet_param_manifest(const emohrnet_config* config,
                                                     char** out);

/* Checkpoints. */
EMOHRNET_API emohrnet_status emohrnet_checkpoint_load(const char* path,
                                                      emohrnet_checkpoint** out);
EMOHRNET_API emohrnet_status emohrnet_checkpoint_save(const emohrnet_checkpoint* ckpt,
                                                      const char* path);
EMOHRNET_API uint64_t emohrnet_checkpoint_epoch(const emohrnet_checkpoint* ckpt);
/* Returns 1 and stores the validation metric if one was recorded. */
EMOHRNET_API int emohrnet_checkpoint_metric(const emohrnet_checkpoint* ckpt,
                                            double* out);
EMOHRNET_API uint64_t emohrnet_checkpoint_param_count(const emohrnet_checkpoint* ckpt);
/* The resolved engine config stored in the checkpoint. */
EMOHRNET_API emohrnet_status emohrnet_checkpoint_config(const emohrnet_checkpoint* ckpt,
                                                        emohrnet_config** out);
EMOHRNET_API void emohrnet_checkpoint_free(emohrnet_checkpoint* ckpt);

/* Commands. */
EMOHRNET_API emohrnet_status emohrnet_preprocess(const emohrnet_config* config,
                                                 const char* out_dir,
                                                 char** summary_text);
EMOHRNET_API emohrnet_status emohrnet_augment_preview(const emohrnet_config* config,
                                                      const char* sample_path,
                                                      uint64_t seed,
                                                      const char* out_dir);

typedef void (*emohrnet_epoch_fn)(void* user, uint64_t epoch, double train_loss,
                                  int has_val_metric, double val_metric);

/* resume_path may be NULL. on_epoch may be NULL. */
EMOHRNET_API emohrnet_status emohrnet_train(const emohrnet_config* config,
                                            const char* out_dir,
                                            const char* resume_path,
                                            emohrnet_epoch_fn on_epoch, void* user);
/* split is "train", "val" or "test". */
EMOHRNET_API emohrnet_status emohrnet_eval(const emohrnet_config* config,
                                           const char* checkpoint_path,
                                           const char* split, char** report_json,
                                           char** table_text);
/* Runs every per-op gradient check, then the model-level checks on the
 * config's architecture at an in_mels x in_frames input (0 keeps the
 * config's dims). Returns EMOHRNET_ERR_CHECK_FAILED if any check fails; the
 * report is filled either way. corrupt_scale != 1 scales analytic gradients
 * (negative control). */
EMOHRNET_API emohrnet_status emohrnet_gradcheck(const emohrnet_config* config,
                                                uint64_t seed, uint64_t in_mels,
                                                uint64_t in_frames, double corrupt_scale,
                                                char** report_text);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* EMOHRNET_EMOHRNET_H_ */
