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

#ifndef EMOHRNET_SRC_AUGMENT_H_
#define EMOHRNET_SRC_AUGMENT_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "audio.h"
#include "rng.h"

namespace emohrnet {

struct AugmentPolicy {
  std::size_t freq_mask_width = 12;  // F: widths drawn from U{0..F}
  std::size_t time_mask_width = 30;  // T: widths drawn from U{0..T}
  std::size_t n_freq_masks = 1;
  std::size_t n_time_masks = 1;
  std::size_t max_shift = 0;
  double mask_value = 0.0;
  bool enabled = true;

  bool operator==(const AugmentPolicy&) const = default;
};

// Realized draws of one augment() call.
struct MaskDraw {
  std::size_t width = 0;
  std::size_t start = 0;
};

struct AugmentTrace {
  int64_t shift = 0;
  std::vector<MaskDraw> freq_masks;
  std::vector<MaskDraw> time_masks;
};

// Deterministic primitives.
Matrix apply_time_shift(const Matrix& m, int64_t shift);
void apply_freq_mask(Matrix& m, const MaskDraw& draw, double value);
void apply_time_mask(Matrix& m, const MaskDraw& draw, double value);

// Random versions; each draws its parameters from `rng` and reports them.
Matrix time_shift(const Matrix& m, std::size_t max_shift, Rng& rng,
                  int64_t* drawn = nullptr);
Matrix freq_mask(const Matrix& m, std::size_t max_width, double value, Rng& rng,
                 MaskDraw* drawn = nullptr);
Matrix time_mask(const Matrix& m, std::size_t max_width, double value, Rng& rng,
                 MaskDraw* drawn = nullptr);

// Shift, then frequency masks, then time masks. A disabled policy returns
// the input untouched and draws nothing.
Matrix augment(const Matrix& m, const AugmentPolicy& policy, Rng& rng,
               AugmentTrace* trace = nullptr);

MelSpectrogram augment(const MelSpectrogram& mel, const AugmentPolicy& policy,
                       Rng& rng, AugmentTrace* trace = nullptr);

// Validates policy bounds against a spectrogram of the given size.
void check_policy(const AugmentPolicy& policy, std::size_t n_mels,
                  std::size_t n_frames);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_AUGMENT_H_
