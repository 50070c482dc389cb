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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nightnoise/frames.hpp"

namespace nightnoise {

enum class EstimationErrc {
  empty_input,
  insufficient_diversity,
  single_frame_clips,
  too_few_frames,
  geometry_mismatch,
};

class EstimationError : public std::runtime_error {
 public:
  EstimationError(EstimationErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  EstimationErrc code() const { return code_; }

 private:
  EstimationErrc code_;
};

// Heteroscedastic fit var(x) = intercept + shot * x on per-intensity buckets
// of temporally and spatially centred residuals. The intercept absorbs the
// quantisation variance; `quant` is recovered separately from the negative
// fourth cumulant a uniform term contributes (k4 = -quant^4 / 120).
struct ShotReadEstimate {
  double read = 0.0;       // intercept - quant^2/12 (when identified), clamped at 0
  double shot = 0.0;
  double intercept = 0.0;
  double quant = 0.0;
  bool quant_identified = false;
  double fourth_cumulant = 0.0;
  double fourth_cumulant_stderr = 0.0;
  std::vector<std::string> warnings;

  // Incoherent per-pixel variance at clean value x.
  double pixel_variance(double x) const { return intercept + shot * x; }
};

struct RowEstimate {
  double row = 0.0;
  double row_t = 0.0;
  bool row_t_identifiable = true;
  std::vector<std::string> warnings;
};

struct PeriodicEstimate {
  std::array<double, 3> lambda_f = {0.0, 0.0, 0.0};
  std::vector<std::string> warnings;
};

ShotReadEstimate estimate_shot_read(std::span<const PairedBurst> bursts);

// Throws EstimationError(single_frame_clips) when no clip has two frames.
RowEstimate estimate_row(std::span<const PairedBurst> bursts);
RowEstimate estimate_row(std::span<const PairedBurst> bursts, const ShotReadEstimate& pixel_noise);

PeriodicEstimate estimate_periodic(std::span<const PairedBurst> bursts, const std::array<double, 3>& freqs);
PeriodicEstimate estimate_periodic(std::span<const PairedBurst> bursts, const std::array<double, 3>& freqs,
                                   const ShotReadEstimate& pixel_noise);

// Pixel-wise mean residual over every frame of every burst.
FrameBuffer estimate_fixed_pattern(std::span<const PairedBurst> bursts);

// Subtracts each row's mean (removes clip-constant banding that leaks into
// a measured pattern averaged over few clips).
FrameBuffer remove_row_means(const FrameBuffer& frame);

}  // namespace nightnoise
