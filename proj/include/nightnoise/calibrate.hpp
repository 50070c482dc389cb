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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nightnoise/adversarial.hpp"
#include "nightnoise/estimators.hpp"
#include "nightnoise/frames.hpp"
#include "nightnoise/noisegen.hpp"

namespace nightnoise {

struct CalibrationConfig {
  // Quantisation initialisation 1 / 2^bit_depth, used unless the fourth
  // cumulant identifies the interval (and prefer_kurtosis is set).
  int bit_depth = 12;
  bool prefer_kurtosis = true;
  int patch = 64;
  int stride = 64;
  std::array<double, 3> freqs = {0.5, 0.25, 0.125};
  // Strip row means from the measured fixed pattern; clip-constant banding
  // otherwise leaks into it through the per-clip averages.
  bool remove_pattern_row_means = true;
  bool refine = true;
  CriticState critic;
  int fourier_bins = 8;
  int hist_bins = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CalibrationReport {
  ShotReadEstimate shot_read;
  RowEstimate row;
  PeriodicEstimate periodic;
  NoiseParams moment_params;
  NoiseParams params;
  std::optional<RefineResult> refinement;
  double kld_moment = 0.0;
  double kld_final = 0.0;
  std::vector<std::string> warnings;
};

// Moment estimators, then adversarial refinement. Estimator errors
// propagate, except that single-frame clips only lose the row_t split.
CalibrationReport calibrate(std::span<const PairedBurst> bursts, const CalibrationConfig& config);

// Report with per-stage estimates, refinement trace and the params payload
// (`pattern_ref` names the fixed-pattern file, if written).
std::string calibration_report_json(const CalibrationReport& report,
                                    const std::optional<std::string>& pattern_ref = std::nullopt);

}  // namespace nightnoise
