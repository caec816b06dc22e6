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

#ifndef EMOHRNET_SRC_AUDIO_H_
#define EMOHRNET_SRC_AUDIO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace emohrnet {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

struct Waveform {
  std::vector<double> samples;
  uint32_t sample_rate = 0;
};

struct DspConfig {
  uint32_t sample_rate = 16000;
  std::size_t n_fft = 512;
  std::size_t hop = 160;
  std::size_t n_mels = 64;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  void validate() const;
  std::size_t n_bins() const { return n_fft / 2 + 1; }
  bool operator==(const DspConfig&) const = default;
};

struct MelSpectrogram {
  Matrix values;  // n_mels x n_frames
  DspConfig config;
  std::string source_id;
};

// Reads a RIFF/WAVE PCM-16 file, mono or stereo (stereo is averaged).
Waveform load_wav(const std::filesystem::path& path);
// Writes mono PCM-16; samples are clamped to [-1, 1) and rounded.
void write_wav(const std::filesystem::path& path, const Waveform& wave);
// Quantizes like write_wav followed by load_wav.
std::vector<int16_t> quantize_pcm16(std::span<const double> samples);

std::size_t frame_count(std::size_t n_samples, const DspConfig& cfg);
std::vector<double> hann_window(std::size_t n);

// |DFT|^2 of Hann-windowed frames, bins x frames, no centering.
Matrix stft_power(const Waveform& wave, const DspConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// n_mels + 2 edge frequencies (Hz) of the triangular filters; filter m spans
// edges m..m+2 and peaks at edge m+1.
std::vector<double> mel_edges_hz(const DspConfig& cfg);
// n_mels x n_bins, unnormalized peak-1 triangles.
Matrix mel_filterbank(const DspConfig& cfg);

// log(filterbank * power + floor), z-scored per utterance. Constant input
// normalizes to all zeros.
MelSpectrogram mel_spectrogram(const Waveform& wave, const DspConfig& cfg,
                               std::string source_id = {});
void normalize_in_place(Matrix& m);

// Right-pads with zeros or center-crops the frame axis to `n_frames`.
Matrix fit_frames(const Matrix& m, std::size_t n_frames);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_AUDIO_H_
