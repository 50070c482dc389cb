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

#include "nightnoise/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nightnoise {

namespace {

constexpr std::size_t kMoments = 4;

}  // namespace

FeatureMap::FeatureMap(int patch_size, double residual_sigma, int fourier_bins, int hist_bins)
    : patch_(patch_size), fourier_bins_(fourier_bins), hist_bins_(hist_bins), sigma_(residual_sigma) {
  if (patch_size < 2 || patch_size % 2 != 0) throw std::invalid_argument("feature patch size must be even and >= 2");
  if (fourier_bins < 1 || fourier_bins > patch_size / 2) throw std::invalid_argument("fourier bins out of range");
  if (hist_bins < 2) throw std::invalid_argument("histogram needs at least two bins");
  if (!(residual_sigma > 0.0) || !std::isfinite(residual_sigma)) {
    throw std::invalid_argument("histogram scale must be positive and finite");
  }
  hist_step_ = 8.0 * sigma_ / hist_bins_;
  hist_lo_ = -4.0 * sigma_ + 0.5 * hist_step_;

  const int half = patch_ / 2;
  cos_.resize(static_cast<std::size_t>(fourier_bins_) * patch_);
  sin_.resize(cos_.size());
  for (int j = 0; j < fourier_bins_; ++j) {
    const int k = std::max(1, (j + 1) * half / fourier_bins_);
    bins_.push_back(k);
    for (int c = 0; c < patch_; ++c) {
      // Integer phase keeps the tables exact at k c = multiples of P/4.
      const int m = (k * c) % patch_;
      const double th = 2.0 * std::numbers::pi * m / patch_;
      double cv = std::cos(th), sv = std::sin(th);
      if (4 * m % patch_ == 0) {
        const int q = 4 * m / patch_;
        cv = q == 0 ? 1.0 : q == 2 ? -1.0 : 0.0;
        sv = q == 1 ? 1.0 : q == 3 ? -1.0 : 0.0;
      }
      cos_[static_cast<std::size_t>(j) * patch_ + c] = cv;
      sin_[static_cast<std::size_t>(j) * patch_ + c] = sv;
    }
  }
}

std::vector<std::string> FeatureMap::names() const {
  std::vector<std::string> n = {"mean", "variance", "row_mean_variance", "col_mean_variance"};
  for (int k : bins_) n.push_back("power_k" + std::to_string(k));
  for (int j = 0; j < hist_bins_; ++j) n.push_back("hist_" + std::to_string(j));
  return n;
}

PatchFeatures FeatureMap::forward(std::span<const double> patch) const {
  if (patch.size() != pixels()) throw std::invalid_argument("patch size does not match the feature map");
  const int p = patch_;
  const auto n = static_cast<double>(pixels());
  PatchFeatures f;
  f.map_ = this;
  f.x_.assign(patch.begin(), patch.end());
  f.raw_.assign(dim(), 0.0);
  f.row_mean_.assign(static_cast<std::size_t>(p), 0.0);
  f.col_mean_.assign(static_cast<std::size_t>(p), 0.0);

  double total = 0.0;
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) {
      const double v = f.x_[static_cast<std::size_t>(r) * p + c];
      f.row_mean_[static_cast<std::size_t>(r)] += v;
      f.col_mean_[static_cast<std::size_t>(c)] += v;
      total += v;
    }
  }
  f.mean_ = total / n;
  for (auto& v : f.row_mean_) v /= p;
  for (auto& v : f.col_mean_) v /= p;

  double var = 0.0;
  for (double v : f.x_) var += (v - f.mean_) * (v - f.mean_);
  double rv = 0.0, cv = 0.0;
  for (int i = 0; i < p; ++i) {
    rv += (f.row_mean_[static_cast<std::size_t>(i)] - f.mean_) * (f.row_mean_[static_cast<std::size_t>(i)] - f.mean_);
    cv += (f.col_mean_[static_cast<std::size_t>(i)] - f.mean_) * (f.col_mean_[static_cast<std::size_t>(i)] - f.mean_);
  }
  f.raw_[0] = f.mean_;
  f.raw_[1] = var / n;
  f.raw_[2] = rv / p;
  f.raw_[3] = cv / p;

  const auto kb = static_cast<std::size_t>(fourier_bins_);
  f.cos_acc_.assign(static_cast<std::size_t>(p) * kb, 0.0);
  f.sin_acc_.assign(f.cos_acc_.size(), 0.0);
  for (int r = 0; r < p; ++r) {
    const double* row = &f.x_[static_cast<std::size_t>(r) * p];
    for (std::size_t j = 0; j < kb; ++j) {
      const double* ct = &cos_[j * p];
      const double* st = &sin_[j * p];
      double cs = 0.0, ss = 0.0;
      for (int c = 0; c < p; ++c) {
        cs += row[c] * ct[c];
        ss += row[c] * st[c];
      }
      f.cos_acc_[static_cast<std::size_t>(r) * kb + j] = cs;
      f.sin_acc_[static_cast<std::size_t>(r) * kb + j] = ss;
      f.raw_[kMoments + j] += (cs * cs + ss * ss) / n;
    }
  }

  // Soft histogram via the Gaussian ratio recurrence: two exponentials per
  // pixel instead of one per bin.
  const auto hb = static_cast<std::size_t>(hist_bins_);
  const double h = hist_step_;
  const double inv_h2 = 1.0 / (h * h);
  constexpr double kStepDecay = 0.36787944117144233;  // exp(-1)
  f.hist_deriv_.assign(f.x_.size() * hb, 0.0);
  std::vector<double> kern(hb);
  const std::size_t base = kMoments + kb;
  for (std::size_t i = 0; i < f.x_.size(); ++i) {
    const double d0 = (f.x_[i] - hist_lo_) / h;
    const long js = std::clamp(std::lround(d0), 0L, static_cast<long>(hb) - 1);
    const double d = d0 - static_cast<double>(js);
    const double e = std::exp(-0.5 * d * d);
    kern[static_cast<std::size_t>(js)] = e;
    double up = e, r_up = std::exp(d - 0.5);
    for (std::size_t j = static_cast<std::size_t>(js) + 1; j < hb; ++j) {
      up *= r_up;
      r_up *= kStepDecay;
      kern[j] = up;
    }
    double dn = e, r_dn = std::exp(-d - 0.5);
    for (long j = js - 1; j >= 0; --j) {
      dn *= r_dn;
      r_dn *= kStepDecay;
      kern[static_cast<std::size_t>(j)] = dn;
    }
    double* deriv = &f.hist_deriv_[i * hb];
    for (std::size_t j = 0; j < hb; ++j) {
      f.raw_[base + j] += kern[j] / n;
      const double cj = hist_lo_ + static_cast<double>(j) * h;
      deriv[j] = -kern[j] * (f.x_[i] - cj) * inv_h2;
    }
  }

  f.values_ = f.raw_;
  if (standardized()) {
    for (std::size_t j = 0; j < dim(); ++j) f.values_[j] = (f.raw_[j] - offset_[j]) / scale_[j];
  }
  return f;
}

std::vector<double> FeatureMap::evaluate(std::span<const float> patch) const {
  std::vector<double> x(patch.begin(), patch.end());
  return forward(x).values();
}

void PatchFeatures::vjp(std::span<const double> u, std::span<double> out) const {
  const FeatureMap& m = *map_;
  const std::size_t d = m.dim();
  if (u.size() != d || out.size() != x_.size()) throw std::invalid_argument("vjp dimension mismatch");
  std::vector<double> su(u.begin(), u.end());
  if (m.standardized()) {
    for (std::size_t j = 0; j < d; ++j) su[j] /= m.scale_[j];
  }
  const int p = m.patch_;
  const double n = static_cast<double>(x_.size());
  const auto kb = static_cast<std::size_t>(m.fourier_bins_);
  const auto hb = static_cast<std::size_t>(m.hist_bins_);
  const std::size_t base = kMoments + kb;

  // Row-wise Fourier part: out_rc += sum_j (2/n) su_j (C_rj cos_jc + S_rj sin_jc).
  std::vector<double> wc(kb), ws(kb);
  for (int r = 0; r < p; ++r) {
    for (std::size_t j = 0; j < kb; ++j) {
      wc[j] = 2.0 * su[kMoments + j] * cos_acc_[static_cast<std::size_t>(r) * kb + j] / n;
      ws[j] = 2.0 * su[kMoments + j] * sin_acc_[static_cast<std::size_t>(r) * kb + j] / n;
    }
    const double row_term = 2.0 * su[2] * (row_mean_[static_cast<std::size_t>(r)] - mean_) / n;
    for (int c = 0; c < p; ++c) {
      const auto i = static_cast<std::size_t>(r) * p + c;
      double g = su[0] / n + 2.0 * su[1] * (x_[i] - mean_) / n + row_term +
                 2.0 * su[3] * (col_mean_[static_cast<std::size_t>(c)] - mean_) / n;
      for (std::size_t j = 0; j < kb; ++j) {
        g += wc[j] * m.cos_[j * p + static_cast<std::size_t>(c)] + ws[j] * m.sin_[j * p + static_cast<std::size_t>(c)];
      }
      const double* deriv = &hist_deriv_[i * hb];
      for (std::size_t j = 0; j < hb; ++j) g += su[base + j] * deriv[j] / n;
      out[i] = g;
    }
  }
}

void PatchFeatures::jvp(std::span<const double> v, std::span<double> out) const {
  const FeatureMap& m = *map_;
  const std::size_t d = m.dim();
  if (v.size() != x_.size() || out.size() != d) throw std::invalid_argument("jvp dimension mismatch");
  const int p = m.patch_;
  const double n = static_cast<double>(x_.size());
  const auto kb = static_cast<std::size_t>(m.fourier_bins_);
  const auto hb = static_cast<std::size_t>(m.hist_bins_);
  const std::size_t base = kMoments + kb;
  std::fill(out.begin(), out.end(), 0.0);

  std::vector<double> col_sum(static_cast<std::size_t>(p), 0.0);
  for (int r = 0; r < p; ++r) {
    const double* vr = &v[static_cast<std::size_t>(r) * p];
    double row_sum = 0.0;
    for (int c = 0; c < p; ++c) {
      const auto i = static_cast<std::size_t>(r) * p + c;
      row_sum += vr[c];
      col_sum[static_cast<std::size_t>(c)] += vr[c];
      out[1] += 2.0 * (x_[i] - mean_) * vr[c];
      const double* deriv = &hist_deriv_[i * hb];
      for (std::size_t j = 0; j < hb; ++j) out[base + j] += deriv[j] * vr[c];
    }
    out[0] += row_sum;
    out[2] += 2.0 * (row_mean_[static_cast<std::size_t>(r)] - mean_) * row_sum;
    for (std::size_t j = 0; j < kb; ++j) {
      double vc = 0.0, vs = 0.0;
      for (int c = 0; c < p; ++c) {
        vc += vr[c] * m.cos_[j * p + static_cast<std::size_t>(c)];
        vs += vr[c] * m.sin_[j * p + static_cast<std::size_t>(c)];
      }
      out[kMoments + j] += 2.0 * (cos_acc_[static_cast<std::size_t>(r) * kb + j] * vc +
                                  sin_acc_[static_cast<std::size_t>(r) * kb + j] * vs);
    }
  }
  for (int c = 0; c < p; ++c) out[3] += 2.0 * (col_mean_[static_cast<std::size_t>(c)] - mean_) * col_sum[static_cast<std::size_t>(c)];
  for (std::size_t j = 0; j < d; ++j) {
    out[j] /= n;
    if (m.standardized()) out[j] /= m.scale_[j];
  }
}

std::vector<double> FeatureMap::jacobian(std::span<const double> patch) const {
  const PatchFeatures f = forward(patch);
  const std::size_t d = dim();
  std::vector<double> jac(d * pixels());
  std::vector<double> e(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    e[j] = 1.0;
    f.vjp(e, std::span<double>(jac).subspan(j * pixels(), pixels()));
    e[j] = 0.0;
  }
  return jac;
}

void FeatureMap::standardize_from(std::span<const double> raw_rows, std::size_t count) {
  const std::size_t d = dim();
  if (count == 0 || raw_rows.size() != count * d) throw std::invalid_argument("standardisation rows do not match");
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += raw_rows[i * d + j];
  }
  for (auto& v : mu) v /= static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double e = raw_rows[i * d + j] - mu[j];
      sd[j] += e * e;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    sd[j] = count > 1 ? std::sqrt(sd[j] / static_cast<double>(count - 1)) : 0.0;
    // Constant features (or nearly so) keep unit scale rather than blowing up.
    if (!(sd[j] > 1e-12 * (std::abs(mu[j]) + 1e-300)) || sd[j] < 1e-300) sd[j] = 1.0;
  }
  set_standardization(std::move(mu), std::move(sd));
}

void FeatureMap::set_standardization(std::vector<double> offset, std::vector<double> scale) {
  if (offset.size() != dim() || scale.size() != dim()) throw std::invalid_argument("standardisation size mismatch");
  for (double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("standardisation scale must be positive");
  }
  offset_ = std::move(offset);
  scale_ = std::move(scale);
}

void FeatureMap::clear_standardization() {
  offset_.clear();
  scale_.clear();
}

}  // namespace nightnoise
