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

#include "rng.h"

#include <cmath>
#include <numbers>

namespace emohrnet {
namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr,
                                      std::array<uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
    const uint32_t lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
    const uint32_t lo1 = static_cast<uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace

uint64_t mix_stream(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

Rng::Rng(const RngState& state)
    : seed_(state.seed), stream_(state.stream), counter_(state.counter) {
  if (state.buffered < 4 && counter_ > 0) {
    // Regenerate the partially consumed block.
    --counter_;
    refill();
    buffered_ = state.buffered;
  }
}

void Rng::refill() {
  const std::array<uint32_t, 4> ctr = {
      static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32),
      static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
  block_ = philox4x32_10(ctr, {static_cast<uint32_t>(seed_),
                               static_cast<uint32_t>(seed_ >> 32)});
  ++counter_;
  buffered_ = 0;
}

uint32_t Rng::next_u32() {
  if (buffered_ >= 4) refill();
  return block_[buffered_++];
}

uint64_t Rng::next_u64() {
  const uint64_t hi = next_u32();
  const uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::uniform_int(uint64_t lo, uint64_t hi) {
  const uint64_t range = hi - lo + 1;
  if (range == 0) return next_u64();  // full 64-bit range
  const uint64_t threshold = (0 - range) % range;
  for (;;) {
    const uint64_t x = next_u64();
    if (x >= threshold) return lo + x % range;
  }
}

int64_t Rng::uniform_int_signed(int64_t lo, int64_t hi) {
  const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo);
  return static_cast<int64_t>(static_cast<uint64_t>(lo) + uniform_int(0, span));
}

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(uint64_t tag) const {
  return Rng(seed_, mix_stream(stream_, tag));
}

RngState Rng::state() const {
  return RngState{seed_, stream_, counter_, buffered_ >= 4 ? 4u : buffered_};
}

}  // namespace emohrnet
