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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nightnoise/features.hpp"
#include "nightnoise/noisegen.hpp"
#include "nightnoise/patches.hpp"
#include "nightnoise/rng.hpp"

namespace nightnoise {

// Linear critic D(x) = w . phi(x) plus its optimisation settings.
struct CriticState {
  std::vector<double> weights;  // empty = zeros of the feature dimension
  double gp_coeff = 10.0;
  double critic_lr = 0.02;
  double gen_lr = 0.02;
  int steps = 200;
  int critic_ratio = 5;
  int batch = 32;
  // Interpolated pairs per critic step used for the gradient penalty.
  int gp_batch = 8;
  // Refine read/shot and row/row_t as scaled pairs (their split is not
  // visible to a critic of single noise patches; see refine_params).
  bool tie_unidentifiable = true;
  // KLD is recorded in the trace every this many generator steps.
  int trace_every = 10;

  // Throws std::invalid_argument on non-finite weights, negative gp_coeff,
  // non-positive counts, or weights of the wrong dimension.
  void validate(std::size_t feature_dim) const;
};

// Patches in double precision with their (map-unit) features.
struct PatchBatch {
  int patch_size = 0;
  std::size_t count = 0;
  std::vector<double> pixels;    // count x P^2
  std::vector<double> features;  // count x dim

  std::span<const double> patch(std::size_t i) const {
    const std::size_t n = static_cast<std::size_t>(patch_size) * patch_size;
    return std::span<const double>(pixels).subspan(i * n, n);
  }
  std::span<const double> feature(std::size_t i, std::size_t dim) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
};

PatchBatch make_batch(const FeatureMap& features, std::vector<double> pixels, std::size_t count);
// Selected patches of a residual set.
PatchBatch gather_batch(const FeatureMap& features, const ResidualPatchSet& set, std::span<const std::size_t> indices);

struct WganLoss {
  double loss = 0.0;
  double critic_gap = 0.0;  // E[D(synth)] - E[D(real)]
  double penalty = 0.0;     // gp_coeff * E[(|grad D(x_hat)| - 1)^2]
  std::vector<double> critic_grad;
  // d E[D(synth)] / d phi(synth_b), identical for every b: w / count.
  std::vector<double> feature_grad;
};

// L = E[D(synth)] - E[D(real)] + gp_coeff E[(|grad_x D(x_hat)|_2 - 1)^2]
// with x_hat = t x_real + (1 - t) x_synth for the first interp.size() pairs.
// Throws std::invalid_argument on batch-size or weight-dimension mismatch.
WganLoss wgan_gp_loss(const PatchBatch& real, const PatchBatch& synth, const CriticState& critic,
                      const FeatureMap& features, std::span<const double> interp);

// Generator parameters in standard-deviation units:
// [sqrt(read), sqrt(shot), sqrt(row), sqrt(row_t), quant, f1, f2, f3].
inline constexpr std::size_t kGenParams = 8;
using GenVector = std::array<double, kGenParams>;

GenVector to_std_units(const NoiseParams& params);
void apply_std_units(const GenVector& p, NoiseParams& params);
std::string_view gen_param_name(std::size_t i);

// Random draws behind one synthetic patch, held fixed so the patch is a
// smooth function of the parameters.
struct PatchDraw {
  std::vector<double> z;      // shot/read normals, P^2
  std::vector<double> u;      // quantisation uniforms, P^2
  std::vector<double> row;    // per-row normals, P
  std::vector<double> row_t;  // clip-constant per-row normals, P
  std::array<double, 3> amp{};
  std::array<double, 3> phase{};
};

struct GeneratorSample {
  std::vector<double> clean;  // P^2 crop of the clean frame
  std::vector<double> fixed;  // P^2 crop of the fixed pattern, or empty
  PatchDraw draw;
};

class PatchGenerator {
 public:
  PatchGenerator(int patch_size, std::array<double, 3> freqs);

  int patch_size() const { return patch_; }
  std::size_t pixels() const { return static_cast<std::size_t>(patch_) * patch_; }

  PatchDraw draw(const NoiseStream& stream) const;
  // Residual clip(clean + n, 0, 1) - clean. When `jac` is nonempty it
  // receives d out / d p (kGenParams x P^2), zero where the sum left [0, 1].
  void render(const GenVector& p, const GeneratorSample& sample, std::span<double> out,
              std::span<double> jac = {}) const;

 private:
  int patch_;
  std::array<double, 3> freqs_;
};

// Clip ids reserved for refinement draws (the top of the 24-bit range).
inline constexpr std::uint64_t kRefineCriticClip = 0xFFFFF0;
inline constexpr std::uint64_t kRefineGeneratorClip = 0xFFFFF1;
inline constexpr std::uint64_t kRefineEvalClip = 0xFFFFF2;

// `count` samples at uniformly drawn patch origins of `real`.
std::vector<GeneratorSample> draw_generator_batch(const ResidualPatchSet& real, const NoiseParams& params,
                                                  const PatchGenerator& gen, std::uint64_t clip, std::uint64_t step,
                                                  std::size_t count);

struct GeneratorObjective {
  double value = 0.0;  // -E[D(synth)]
  GenVector grad_std{};
  // Gradient with respect to the eight lambdas; 0 where a variance-type
  // lambda is 0 (its std-unit parameter is a stationary point there).
  GenVector grad_lambda{};
};

GeneratorObjective generator_objective(const NoiseParams& params, const std::vector<GeneratorSample>& batch,
                                       const PatchGenerator& gen, const CriticState& critic,
                                       const FeatureMap& features);

// Map whose histogram spans the pooled spread of `real`.
FeatureMap make_feature_map(const ResidualPatchSet& real, int fourier_bins = 8, int hist_bins = 16);

struct TracePoint {
  int step = 0;
  double loss = 0.0;
  double critic_gap = 0.0;
  double penalty = 0.0;
  double kld = 0.0;
  NoiseParams params;
};

struct RefineResult {
  NoiseParams params;
  CriticState critic;
  std::vector<TracePoint> trace;
  int steps_run = 0;
  bool diverged = false;
  std::vector<std::string> warnings;
};

// Alternates critic_ratio critic steps with one generator step (Adam, linear
// learning-rate decay). The fixed pattern is carried through unchanged.
// `features` is standardised on `real` when it is not already.
RefineResult refine_params(const NoiseParams& init, const ResidualPatchSet& real, const CriticState& critic,
                           const FeatureMap& features);

// Pooled residual values of the generator at `params` over every origin of
// `real` (one synthetic patch per real patch, fixed seed).
std::vector<float> synthesize_like(const NoiseParams& params, const ResidualPatchSet& real, std::uint64_t seed);

}  // namespace nightnoise
