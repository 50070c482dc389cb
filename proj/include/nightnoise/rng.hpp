// Copyright (c) 2026 The nightnoise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace nightnoise {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: output is a pure function
// of (counter, key), so any element of any stream can be drawn independently
// of evaluation order.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

// Component identifiers; each stochastic term owns a disjoint substream.
enum class StreamComponent : std::uint32_t {
  shot_read = 1,
  row = 2,
  row_t = 3,
  periodic = 4,
  quant = 5,
  // Used by calibration/evaluation for batch selection and interpolation draws.
  selection = 16,
  interpolation = 17,
  // Virtual-sensor fixed pattern.
  pattern = 18,
};

// Frame id reserved for clip-level draws (clip-constant banding).
inline constexpr std::uint64_t kClipLevelFrame = 0xFFFFFFFFull;

// Addresses one substream: (master_seed, clip_id, frame_id, component). The
// element index (typically the pixel index) completes the Philox counter.
// clip_id uses the low 24 bits, frame_id the low 32 bits.
struct NoiseStream {
  std::uint64_t master_seed = 0;
  std::uint64_t clip_id = 0;
  std::uint64_t frame_id = 0;
  StreamComponent component = StreamComponent::shot_read;

  std::array<std::uint32_t, 4> block(std::uint64_t index) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
        static_cast<std::uint32_t>(frame_id),
        (static_cast<std::uint32_t>(clip_id) << 8) | (static_cast<std::uint32_t>(component) & 0xffu)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(master_seed),
                                              static_cast<std::uint32_t>(master_seed >> 32)};
    return philox4x32(ctr, key);
  }

  // [0, 1) with 53-bit resolution.
  double uniform(std::uint64_t index) const {
    const auto b = block(index);
    return to_unit(b[0], b[1]);
  }

  // Standard normal via the cosine branch of Box-Muller.
  double normal(std::uint64_t index) const {
    const auto b = block(index);
    const double u1 = 1.0 - to_unit(b[0], b[1]);  // (0, 1]
    const double u2 = to_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  NoiseStream with(StreamComponent c) const { return {master_seed, clip_id, frame_id, c}; }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }
};

}  // namespace nightnoise
