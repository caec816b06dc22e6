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

#include "augment.h"

#include <string>

#include "error.h"

namespace emohrnet {

Matrix apply_time_shift(const Matrix& m, int64_t shift) {
  Matrix out(m.rows, m.cols, 0.0);
  const auto cols = static_cast<int64_t>(m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      const int64_t src = c - shift;
      if (src >= 0 && src < cols) {
        out.at(r, static_cast<std::size_t>(c)) = m.at(r, static_cast<std::size_t>(src));
      }
    }
  }
  return out;
}

void apply_freq_mask(Matrix& m, const MaskDraw& draw, double value) {
  require(draw.start + draw.width <= m.rows, "frequency mask exceeds mel bins");
  for (std::size_t r = draw.start; r < draw.start + draw.width; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = value;
  }
}

void apply_time_mask(Matrix& m, const MaskDraw& draw, double value) {
  require(draw.start + draw.width <= m.cols, "time mask exceeds frames");
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = draw.start; c < draw.start + draw.width; ++c) m.at(r, c) = value;
  }
}

Matrix time_shift(const Matrix& m, std::size_t max_shift, Rng& rng, int64_t* drawn) {
  if (max_shift >= m.cols && max_shift > 0) {
    fail(ErrorKind::kInvalidArgument,
         "max_shift " + std::to_string(max_shift) + " must be below frame count " +
             std::to_string(m.cols));
  }
  int64_t shift = 0;
  if (max_shift > 0) {
    const auto bound = static_cast<int64_t>(max_shift);
    shift = rng.uniform_int_signed(-bound, bound);
  }
  if (drawn != nullptr) *drawn = shift;
  if (shift == 0) return m;
  return apply_time_shift(m, shift);
}

namespace {

MaskDraw draw_mask(std::size_t max_width, std::size_t extent, Rng& rng) {
  MaskDraw draw;
  draw.width = static_cast<std::size_t>(rng.uniform_int(0, max_width));
  draw.start = static_cast<std::size_t>(rng.uniform_int(0, extent - draw.width));
  return draw;
}

}  // namespace

Matrix freq_mask(const Matrix& m, std::size_t max_width, double value, Rng& rng,
                 MaskDraw* drawn) {
  if (max_width > m.rows) {
    fail(ErrorKind::kInvalidArgument,
         "frequency mask width F=" + std::to_string(max_width) + " exceeds " +
             std::to_string(m.rows) + " mel bins");
  }
  if (max_width == 0) {
    if (drawn != nullptr) *drawn = MaskDraw{};
    return m;
  }
  const MaskDraw draw = draw_mask(max_width, m.rows, rng);
  if (drawn != nullptr) *drawn = draw;
  Matrix out = m;
  apply_freq_mask(out, draw, value);
  return out;
}

Matrix time_mask(const Matrix& m, std::size_t max_width, double value, Rng& rng,
                 MaskDraw* drawn) {
  if (max_width > m.cols) {
    fail(ErrorKind::kInvalidArgument,
         "time mask width T=" + std::to_string(max_width) + " exceeds " +
             std::to_string(m.cols) + " frames");
  }
  if (max_width == 0) {
    if (drawn != nullptr) *drawn = MaskDraw{};
    return m;
  }
  const MaskDraw draw = draw_mask(max_width, m.cols, rng);
  if (drawn != nullptr) *drawn = draw;
  Matrix out = m;
  apply_time_mask(out, draw, value);
  return out;
}

void check_policy(const AugmentPolicy& policy, std::size_t n_mels,
                  std::size_t n_frames) {
  require(policy.freq_mask_width <= n_mels,
          "augment.freq_mask_width exceeds n_mels");
  require(policy.time_mask_width <= n_frames,
          "augment.time_mask_width exceeds n_frames");
  require(policy.max_shift == 0 || policy.max_shift < n_frames,
          "augment.max_shift must be below n_frames");
}

Matrix augment(const Matrix& m, const AugmentPolicy& policy, Rng& rng,
               AugmentTrace* trace) {
  if (!policy.enabled) return m;
  check_policy(policy, m.rows, m.cols);
  AugmentTrace local;
  Matrix out = time_shift(m, policy.max_shift, rng, &local.shift);
  for (std::size_t i = 0; i < policy.n_freq_masks; ++i) {
    MaskDraw draw;
    out = freq_mask(out, policy.freq_mask_width, policy.mask_value, rng, &draw);
    local.freq_masks.push_back(draw);
  }
  for (std::size_t i = 0; i < policy.n_time_masks; ++i) {
    MaskDraw draw;
    out = time_mask(out, policy.time_mask_width, policy.mask_value, rng, &draw);
    local.time_masks.push_back(draw);
  }
  if (trace != nullptr) *trace = std::move(local);
  return out;
}

MelSpectrogram augment(const MelSpectrogram& mel, const AugmentPolicy& policy,
                       Rng& rng, AugmentTrace* trace) {
  MelSpectrogram out;
  out.config = mel.config;
  out.source_id = mel.source_id;
  out.values = augment(mel.values, policy, rng, trace);
  return out;
}

}  // namespace emohrnet
