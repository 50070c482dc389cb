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

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nightnoise/frames.hpp"
#include "nightnoise/noisegen.hpp"
#include "nightnoise/patches.hpp"

namespace nightnoise {

struct HistogramSpec {
  int bins = 256;
  double lo = -1.0;
  double hi = 1.0;
  // Added to every bin mass before normalisation.
  double epsilon = 1e-6;

  // Throws std::invalid_argument unless bins >= 2, lo < hi and epsilon > 0.
  void validate() const;
};

// Pooled counts; out-of-range values land in the edge bins.
std::vector<std::uint64_t> histogram_counts(std::span<const float> values, const HistogramSpec& spec);
// (c_i / N + eps) / (1 + bins * eps)
std::vector<double> smoothed_histogram(std::span<const std::uint64_t> counts, const HistogramSpec& spec);
double kld_from_counts(std::span<const std::uint64_t> real, std::span<const std::uint64_t> synth,
                       const HistogramSpec& spec);

// sum_i p_i ln(p_i / q_i) with p from real and q from synth, both pooled.
// Throws std::invalid_argument on empty input.
double kld(std::span<const float> real, std::span<const float> synth, const HistogramSpec& spec = {});
double kld(const ResidualPatchSet& real, const ResidualPatchSet& synth, const HistogramSpec& spec = {});

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// -10 log10(MSE / peak^2); identical frames give kPsnrIdentical.
double psnr(const FrameBuffer& a, const FrameBuffer& b, double peak = 1.0);
// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) over every
// fully contained window position.
double ssim(const FrameBuffer& a, const FrameBuffer& b, double peak = 1.0);

// L1 distance between the unit-mass mean row-wise magnitude spectra.
double spectral_distance(const ResidualPatchSet& real, const ResidualPatchSet& synth);

struct AblationVariant {
  std::string name;
  ComponentSet components;
};

struct AblationRow {
  std::string name;
  double kld = 0.0;
};

// {read}, {read,shot}, {+quant}, {+row,row_t}, {+periodic}, {+fixed}.
std::vector<AblationVariant> default_ablation_ladder();

struct AblationOptions {
  int patch = 64;
  int stride = 64;
  std::uint64_t clip_id = 0;
};

// Synthesises `clean` once per variant with the disabled terms removed and
// the same seed for every variant, so variants share their random draws.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants, const NoiseParams& params,
                                      const ResidualPatchSet& real, const Clip& clean,
                                      const HistogramSpec& spec = {}, const AblationOptions& options = {});

std::string histogram_spec_json(const HistogramSpec& spec);
std::string metric_json(const std::string& name, double value, const HistogramSpec& spec);
std::string ablation_json(const std::vector<AblationRow>& rows, const HistogramSpec& spec);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace nightnoise
