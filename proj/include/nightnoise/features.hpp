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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nightnoise {

class FeatureMap;

// Forward pass of one patch: feature values plus the intermediates needed
// for exact vector-Jacobian and Jacobian-vector products.
class PatchFeatures {
 public:
  // Standardised feature vector (raw when the map has no standardisation).
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& raw() const { return raw_; }

  // sum_j u_j d(phi_j)/dx for every pixel.
  void vjp(std::span<const double> u, std::span<double> out) const;
  // (d(phi_j)/dx . v)_j
  void jvp(std::span<const double> v, std::span<double> out) const;

 private:
  friend class FeatureMap;

  const FeatureMap* map_ = nullptr;
  std::vector<double> x_;
  std::vector<double> raw_;
  std::vector<double> values_;
  double mean_ = 0.0;
  std::vector<double> row_mean_;
  std::vector<double> col_mean_;
  std::vector<double> cos_acc_;  // rows x bins
  std::vector<double> sin_acc_;
  // Per pixel: first histogram bin with a live kernel value, then the kernel
  // derivative d K_j / dx for bins [first, first + span).
  std::vector<double> hist_deriv_;
};

// Fixed differentiable statistic map of a P x P residual patch:
//   mean, variance, variance of row means, variance of column means,
//   K row-wise Fourier power bins at k_j = j * (P/2) / K (j = 1..K),
//   H Gaussian soft-histogram counts over [-4 sigma, 4 sigma].
// Features are optionally standardised, (phi - offset) / scale.
class FeatureMap {
 public:
  FeatureMap(int patch_size, double residual_sigma, int fourier_bins = 8, int hist_bins = 16);

  int patch_size() const { return patch_; }
  std::size_t pixels() const { return static_cast<std::size_t>(patch_) * patch_; }
  std::size_t dim() const { return 4 + static_cast<std::size_t>(fourier_bins_ + hist_bins_); }
  int fourier_bins() const { return fourier_bins_; }
  int hist_bins() const { return hist_bins_; }
  double residual_sigma() const { return sigma_; }
  std::vector<std::string> names() const;
  // Fourier bin indices (cycles per patch width).
  const std::vector<int>& fourier_indices() const { return bins_; }

  PatchFeatures forward(std::span<const double> patch) const;
  std::vector<double> evaluate(std::span<const double> patch) const { return forward(patch).values(); }
  std::vector<double> evaluate(std::span<const float> patch) const;
  // dim x pixels, row-major, in the map's (standardised) units.
  std::vector<double> jacobian(std::span<const double> patch) const;

  // Sets offset/scale to the mean and standard deviation of `raw_rows`
  // (count x dim). Constant features keep unit scale.
  void standardize_from(std::span<const double> raw_rows, std::size_t count);
  void set_standardization(std::vector<double> offset, std::vector<double> scale);
  void clear_standardization();
  bool standardized() const { return !offset_.empty(); }
  const std::vector<double>& offset() const { return offset_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  friend class PatchFeatures;

  int patch_;
  int fourier_bins_;
  int hist_bins_;
  double sigma_;
  double hist_lo_ = 0.0;
  double hist_step_ = 1.0;
  std::vector<int> bins_;
  std::vector<double> cos_;  // bins x patch
  std::vector<double> sin_;
  std::vector<double> offset_;
  std::vector<double> scale_;
};

}  // namespace nightnoise
