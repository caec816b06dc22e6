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

#include "audio.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "error.h"

namespace emohrnet {
namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatExtensible = 0xFFFE;

// FFTW plans are created once per length; creation is not thread-safe but
// execution on fresh arrays is.
fftw_plan r2c_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(n, plan);
  return plan;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

void DspConfig::validate() const {
  require(sample_rate > 0, "dsp.sample_rate must be positive");
  require(n_fft >= 2, "dsp.n_fft must be at least 2");
  require(hop > 0 && hop <= n_fft, "dsp.hop must satisfy 0 < hop <= n_fft");
  require(n_mels >= 1, "dsp.n_mels must be at least 1");
  require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
          "dsp frequency range must satisfy 0 <= fmin < fmax <= sample_rate/2");
  require(log_floor > 0.0, "dsp.log_floor must be positive");
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kNotFound, "cannot open audio file: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) {
    fail(ErrorKind::kCorruptData, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    corrupt("not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) corrupt("truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && len >= 40 && avail >= 40) {
        format = read_u16(chunk + 8 + 24);  // sub-format GUID prefix
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = std::min<std::size_t>(len, avail);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) corrupt("missing fmt chunk");
  if (data == nullptr) corrupt("missing data chunk");
  if (format != kFormatPcm) {
    fail(ErrorKind::kUnsupported,
         path.string() + ": non-PCM encoding (format tag " + std::to_string(format) + ")");
  }
  if (bits != 16) {
    fail(ErrorKind::kUnsupported,
         path.string() + ": unsupported bit depth " + std::to_string(bits));
  }
  if (channels != 1 && channels != 2) {
    fail(ErrorKind::kUnsupported,
         path.string() + ": unsupported channel count " + std::to_string(channels));
  }
  if (rate == 0) corrupt("zero sample rate");
  const std::size_t frames = data_len / (2u * channels);
  Waveform wave;
  wave.sample_rate = rate;
  wave.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data + i * 2u * channels;
    const double left = static_cast<int16_t>(read_u16(p)) / 32768.0;
    if (channels == 1) {
      wave.samples[i] = left;
    } else {
      const double right = static_cast<int16_t>(read_u16(p + 2)) / 32768.0;
      wave.samples[i] = (left + right) / 2.0;
    }
  }
  return wave;
}

std::vector<int16_t> quantize_pcm16(std::span<const double> samples) {
  std::vector<int16_t> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double scaled = std::nearbyint(samples[i] * 32768.0);
    out[i] = static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const std::vector<int16_t> pcm = quantize_pcm16(wave.samples);
  const auto data_len = static_cast<uint32_t>(pcm.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, wave.sample_rate);
  put_u32(out, wave.sample_rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (int16_t s : pcm) put_u16(out, static_cast<uint16_t>(s));
  std::ofstream file(path, std::ios::binary);
  if (!file) fail(ErrorKind::kNotFound, "cannot write audio file: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::size_t frame_count(std::size_t n_samples, const DspConfig& cfg) {
  if (n_samples < cfg.n_fft) return 0;
  return (n_samples - cfg.n_fft) / cfg.hop + 1;
}

std::vector<double> hann_window(std::size_t n) {
  // Periodic Hann.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

Matrix stft_power(const Waveform& wave, const DspConfig& cfg) {
  cfg.validate();
  if (wave.sample_rate != cfg.sample_rate) {
    fail(ErrorKind::kConfigMismatch,
         "sample rate " + std::to_string(wave.sample_rate) +
             " Hz does not match configured " + std::to_string(cfg.sample_rate) +
             " Hz (no resampling)");
  }
  if (wave.samples.size() < cfg.n_fft) {
    fail(ErrorKind::kInvalidArgument,
         "signal of " + std::to_string(wave.samples.size()) +
             " samples is shorter than one window of " + std::to_string(cfg.n_fft));
  }
  const std::size_t n = cfg.n_fft;
  const std::size_t bins = cfg.n_bins();
  const std::size_t frames = frame_count(wave.samples.size(), cfg);
  const std::vector<double> window = hann_window(n);
  const fftw_plan plan = r2c_plan(n);
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(bins));
  Matrix power(bins, frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = wave.samples.data() + f * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = src[i] * window[i];
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      power.at(k, f) = re * re + im * im;
    }
  }
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_edges_hz(const DspConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  const double step = (hi - lo) / static_cast<double>(cfg.n_mels + 1);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + step * static_cast<double>(i));
  }
  return edges;
}

Matrix mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const std::vector<double> edges = mel_edges_hz(cfg);
  const std::size_t bins = cfg.n_bins();
  Matrix fb(cfg.n_mels, bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate /
                       static_cast<double>(cfg.n_fft);
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb.at(m, k) = w;
      any = any || w > 0.0;
    }
    if (!any) {
      fail(ErrorKind::kInvalidArgument,
           "mel filter " + std::to_string(m) +
               " covers no FFT bin; n_mels is too large for n_fft=" +
               std::to_string(cfg.n_fft));
    }
  }
  return fb;
}

void normalize_in_place(Matrix& m) {
  if (m.data.empty()) return;
  const auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
  if (*lo == *hi) {
    std::fill(m.data.begin(), m.data.end(), 0.0);
    return;
  }
  const double count = static_cast<double>(m.data.size());
  double mean = 0.0;
  for (double v : m.data) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : m.data) var += (v - mean) * (v - mean);
  const double std_dev = std::sqrt(var / count);
  for (double& v : m.data) v = (v - mean) / std_dev;
}

MelSpectrogram mel_spectrogram(const Waveform& wave, const DspConfig& cfg,
                               std::string source_id) {
  const Matrix power = stft_power(wave, cfg);
  const Matrix fb = mel_filterbank(cfg);
  MelSpectrogram out;
  out.config = cfg;
  out.source_id = std::move(source_id);
  out.values = Matrix(cfg.n_mels, power.cols);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double* w = fb.data.data() + m * fb.cols;
    for (std::size_t f = 0; f < power.cols; ++f) {
      double acc = 0.0;
      for (std::size_t k = 0; k < power.rows; ++k) {
        if (w[k] != 0.0) acc += w[k] * power.at(k, f);
      }
      out.values.at(m, f) = std::log(acc + cfg.log_floor);
    }
  }
  normalize_in_place(out.values);
  return out;
}

Matrix fit_frames(const Matrix& m, std::size_t n_frames) {
  require(n_frames > 0, "target frame count must be positive");
  Matrix out(m.rows, n_frames, 0.0);
  const std::size_t start = m.cols > n_frames ? (m.cols - n_frames) / 2 : 0;
  const std::size_t copy = std::min(m.cols, n_frames);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols + start), copy,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * n_frames));
  }
  return out;
}

}  // namespace emohrnet
