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
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nightnoise/frames.hpp"
#include "nightnoise/parallel.hpp"
#include "nightnoise/rng.hpp"

namespace nightnoise {

// The eight physics-inspired parameters plus the measured fixed pattern.
// Variance-type terms (read, shot, row, row_t) are variances in normalised
// intensity units; quant is an interval width; lambda_f are amplitude
// standard deviations.
struct NoiseParams {
  double lambda_read = 0.0;
  double lambda_shot = 0.0;
  double lambda_row = 0.0;
  double lambda_row_t = 0.0;
  double lambda_quant = 0.0;
  std::array<double, 3> lambda_f = {0.0, 0.0, 0.0};
  // Cycles per pixel of the three horizontal periodic terms.
  std::array<double, 3> freqs = {0.5, 0.25, 0.125};
  std::optional<FrameBuffer> fixed_pattern;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on negative or non-finite values, or a
  // fixed pattern outside the residual domain.
  void validate() const;
  // Variance of the pre-clip residual at clean value x, averaged over phase.
  double pixel_variance(double x) const;
};

enum class NoiseComponent : std::uint8_t { shot, read, quant, row, row_t, periodic, fixed };

inline constexpr std::array<NoiseComponent, 7> kAllComponents = {
    NoiseComponent::shot, NoiseComponent::read, NoiseComponent::quant, NoiseComponent::row,
    NoiseComponent::row_t, NoiseComponent::periodic, NoiseComponent::fixed};

std::string_view component_name(NoiseComponent c);
std::optional<NoiseComponent> parse_component(std::string_view name);

class ComponentSet {
 public:
  constexpr ComponentSet() = default;
  constexpr ComponentSet(std::initializer_list<NoiseComponent> cs) {
    for (auto c : cs) bits_ |= bit(c);
  }
  static constexpr ComponentSet all() {
    ComponentSet s;
    s.bits_ = 0x7f;
    return s;
  }
  constexpr bool contains(NoiseComponent c) const { return (bits_ & bit(c)) != 0; }
  constexpr ComponentSet with(NoiseComponent c) const {
    ComponentSet s = *this;
    s.bits_ |= bit(c);
    return s;
  }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool operator==(const ComponentSet&) const = default;

 private:
  static constexpr std::uint8_t bit(NoiseComponent c) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(c));
  }
  std::uint8_t bits_ = 0;
};

// Copy of `p` with disabled terms forced to zero and the fixed pattern
// dropped when `fixed` is disabled.
NoiseParams restrict_components(const NoiseParams& p, ComponentSet enabled);

// --- params file ------------------------------------------------------------

// JSON params file; fixed_pattern is resolved relative to the file's
// directory.
NoiseParams read_params(const std::filesystem::path& path);
// Writes the JSON file. When a fixed pattern is present it is written next to
// the JSON as `pattern_name` and referenced by relative path.
void write_params(const NoiseParams& params, const std::filesystem::path& path,
                  const std::string& pattern_name = "fixed_pattern.rfr");
// Scalar fields only; fixed_pattern is emitted as `pattern_ref` (or null).
std::string params_to_json(const NoiseParams& params,
                           const std::optional<std::string>& pattern_ref = std::nullopt);

// --- samplers ---------------------------------------------------------------
// Each returns a residual-domain frame with the geometry of its inputs.

// N(0, lambda_read + lambda_shot * x) per pixel.
FrameBuffer sample_shot_read(const FrameBuffer& clean, const NoiseParams& params,
                             const NoiseStream& stream, Exec exec = Exec::parallel);
// One N(0, variance) offset per row, broadcast along the row.
FrameBuffer sample_row(int height, int width, double variance, const NoiseStream& stream,
                       Exec exec = Exec::parallel);
// Sum of a_k cos(2 pi f_k c + phi_k) with a_k ~ N(0, lambda_fk^2), phi_k ~ U[0, 2 pi).
FrameBuffer sample_periodic(int height, int width, const NoiseParams& params,
                            const NoiseStream& stream, Exec exec = Exec::parallel);
// U[-interval/2, interval/2] per pixel.
FrameBuffer sample_quant(int height, int width, double interval, const NoiseStream& stream,
                         Exec exec = Exec::parallel);

struct ClipContext {
  std::uint64_t clip_id = 0;
  std::uint64_t frame_id = 0;
  // Clip-constant banding drawn once per clip (see clip_row_offsets).
  FrameBuffer clip_row_offsets;
};

// sample_row with lambda_row_t on the clip-level stream of `clip_id`.
FrameBuffer clip_row_offsets(int height, int width, const NoiseParams& params, std::uint64_t clip_id,
                             Exec exec = Exec::parallel);

// Pre-clip sum of all noise terms (no clean signal added).
FrameBuffer synthesize_residual(const FrameBuffer& clean, const NoiseParams& params,
                                const ClipContext& ctx, Exec exec = Exec::parallel);
// clip(clean + residual, 0, 1).
FrameBuffer synthesize_frame(const FrameBuffer& clean, const NoiseParams& params,
                             const ClipContext& ctx, Exec exec = Exec::parallel);
// Clip-constant terms drawn once; per-frame terms drawn with frame_id = index.
Clip synthesize_clip(const Clip& clean, const NoiseParams& params, std::uint64_t clip_id,
                     Exec exec = Exec::parallel);

}  // namespace nightnoise
