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

#ifndef EMOHRNET_SRC_RNG_H_
#define EMOHRNET_SRC_RNG_H_

#include <array>
#include <cstdint>

namespace emohrnet {

// Serializable position of an Rng.
struct RngState {
  uint64_t seed = 0;
  uint64_t stream = 0;
  uint64_t counter = 0;
  uint32_t buffered = 0;  // words of the current block already consumed
};

// Philox4x32-10 counter-based generator. The key is the 64-bit seed and the
// upper half of the counter block carries the stream id, so distinct streams
// never overlap and outputs depend only on (seed, stream, draw index).
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream);
  explicit Rng(const RngState& state);

  uint32_t next_u32();
  uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  // Uniform on the closed integer range [lo, hi]; unbiased (rejection).
  uint64_t uniform_int(uint64_t lo, uint64_t hi);
  int64_t uniform_int_signed(int64_t lo, int64_t hi);
  // Standard normal via Box-Muller (one output per call).
  double normal();

  // Independent generator on a stream derived from this one and `tag`.
  Rng split(uint64_t tag) const;

  RngState state() const;
  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  void refill();

  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_ = 0;
  std::array<uint32_t, 4> block_{};
  uint32_t buffered_ = 4;
};

// Deterministic 64-bit mixing of stream identifiers (splitmix64 finalizer).
uint64_t mix_stream(uint64_t a, uint64_t b);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_RNG_H_
