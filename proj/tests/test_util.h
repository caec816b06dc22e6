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

// Shared helpers for the test binaries: temporary directories, synthetic
// audio and the small two-class learning fixture.

#ifndef EMOHRNET_TESTS_TEST_UTIL_H_
#define EMOHRNET_TESTS_TEST_UTIL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "audio.h"
#include "config.h"
#include "dataset.h"

namespace emohrnet::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Sum of sinusoids at `freqs_hz` with unit total amplitude, plus optional
// white noise, scaled to peak `gain`.
Waveform tone(const std::vector<double>& freqs_hz, std::size_t n_samples,
              uint32_t sample_rate = 16000, double gain = 0.5,
              double noise = 0.0, uint64_t seed = 0);

// Small-input DSP used by the learning fixture: 16 mel bins, 256-point FFT,
// hop 128, 4000-sample clips (30 frames, fitted to 32).
DspConfig fixture_dsp();
inline constexpr std::size_t kFixtureFrames = 32;
inline constexpr std::size_t kFixtureSamples = 4000;

// 16 clips, 8 per class: class 0 holds tones in 250-700 Hz, class 1 in
// 2.2-3.8 kHz, with random partials, gains and noise.
std::vector<Waveform> fixture_waves(std::vector<std::size_t>* labels, uint64_t seed = 7);
std::vector<Example> fixture_examples(uint64_t seed = 7);

// Desk architecture at the fixture input size.
HRNetConfig fixture_model(std::size_t n_classes = 2);
// Full-batch Adam at the default rate, augmentation handled by the caller.
TrainConfig fixture_train(std::size_t epochs);

// Writes the fixture clips as WAVs under `dir` with a RAVDESS-schema
// manifest (labels 0 and 1 only). With `split_train_val`, every fourth clip
// goes to val, otherwise all rows are train and val duplicates them.
std::filesystem::path write_fixture_corpus(const std::filesystem::path& dir,
                                           bool split_train_val = false);
// Engine config that trains the RAVDESS-schema fixture corpus.
EngineConfig fixture_engine_config(const std::filesystem::path& manifest,
                                   std::size_t epochs);

}  // namespace emohrnet::testing

#endif  // EMOHRNET_TESTS_TEST_UTIL_H_
