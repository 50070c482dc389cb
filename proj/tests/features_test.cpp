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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

namespace nightnoise {
namespace {

std::vector<double> random_patch(int p, double sigma, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> x(static_cast<std::size_t>(p) * p);
  for (auto& v : x) v = n(rng);
  return x;
}

TEST(FeatureMap, DimensionAndNames) {
  const FeatureMap m(64, 0.03);
  EXPECT_EQ(m.dim(), 28u);
  const auto names = m.names();
  ASSERT_EQ(names.size(), 28u);
  EXPECT_EQ(names[0], "mean");
  EXPECT_EQ(m.fourier_indices().size(), 8u);
  EXPECT_EQ(m.fourier_indices().front(), 4);
  EXPECT_EQ(m.fourier_indices().back(), 32);
  EXPECT_THROW(FeatureMap(64, 0.0), std::invalid_argument);
  EXPECT_THROW(FeatureMap(64, 0.03, 8, 1), std::invalid_argument);
}

TEST(FeatureMap, MomentsOfKnownPatch) {
  // Row r holds the value r, so every row mean differs and columns are flat.
  const int p = 8;
  std::vector<double> x(64);
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) x[static_cast<std::size_t>(r) * p + c] = r;
  }
  const FeatureMap m(p, 1.0, 2, 4);
  const auto f = m.evaluate(x);
  EXPECT_DOUBLE_EQ(f[0], 3.5);
  EXPECT_NEAR(f[1], 5.25, 1e-12);  // variance of 0..7
  EXPECT_NEAR(f[2], 5.25, 1e-12);
  EXPECT_NEAR(f[3], 0.0, 1e-12);
}

TEST(FeatureMap, PowerOfPureCosine) {
  // Each row A cos(2 pi k c / P) projects to A P / 2, so the bin holds
  // P * (A P / 2)^2 / P^2 = A^2 P / 4.
  const int p = 64;
  const FeatureMap m(p, 0.05);
  const double a = 0.1;
  const int k = m.fourier_indices()[3];
  std::vector<double> x(static_cast<std::size_t>(p) * p);
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) {
      x[static_cast<std::size_t>(r) * p + c] = a * std::cos(2.0 * std::numbers::pi * k * c / p + 0.3);
    }
  }
  const auto f = m.evaluate(x);
  EXPECT_NEAR(f[4 + 3], a * a * p / 4.0, 1e-12);
  for (int j = 0; j < 8; ++j) {
    if (j != 3) {
      EXPECT_NEAR(f[4 + static_cast<std::size_t>(j)], 0.0, 1e-12);
    }
  }
}

TEST(FeatureMap, HistogramMassMatchesKernelSum) {
  // A pixel exactly on a bin centre contributes exp(-d^2/2) to bin offset d.
  const FeatureMap m(2, 1.0, 1, 8);
  const double step = 1.0;  // 8 sigma / 8 bins
  const double centre3 = -4.0 + 0.5 * step + 3.0 * step;
  const std::vector<double> x(4, centre3);
  const auto f = m.evaluate(x);
  for (int j = 0; j < 8; ++j) {
    const double d = j - 3;
    EXPECT_NEAR(f[5 + static_cast<std::size_t>(j)], std::exp(-0.5 * d * d), 1e-12) << "bin " << j;
  }
}

TEST(FeatureMap, MeanGradientIsUniform) {
  const FeatureMap m(64, 0.03);
  const auto x = random_patch(64, 0.03, 3);
  const auto jac = m.jacobian(x);
  for (std::size_t i = 0; i < 4096; ++i) ASSERT_DOUBLE_EQ(jac[i], 1.0 / 4096.0);
}

TEST(FeatureMap, VjpMatchesFiniteDifferences) {
  const int p = 16;
  FeatureMap m(p, 0.03, 4, 8);
  const auto x = random_patch(p, 0.03, 5);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> u(m.dim());
  for (auto& v : u) v = n(rng);

  std::vector<double> g(x.size());
  m.forward(x).vjp(u, g);
  auto dot = [&](const std::vector<double>& y) {
    const auto f = m.evaluate(y);
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += u[j] * f[j];
    return s;
  };
  const double h = 1e-6;
  double worst = 0.0, gmax = 0.0;
  for (double v : g) gmax = std::max(gmax, std::abs(v));
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (dot(xp) - dot(xm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[i]));
  }
  EXPECT_LT(worst / gmax, 1e-6);
}

TEST(FeatureMap, JvpIsAdjointOfVjp) {
  const int p = 32;
  FeatureMap m(p, 0.03);
  const auto x = random_patch(p, 0.03, 11);
  const auto v = random_patch(p, 1.0, 12);
  std::vector<double> u(m.dim());
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = std::sin(1.0 + static_cast<double>(j));
  const PatchFeatures f = m.forward(x);
  std::vector<double> jv(m.dim()), jtu(x.size());
  f.jvp(v, jv);
  f.vjp(u, jtu);
  double a = 0.0, b = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) a += u[j] * jv[j];
  for (std::size_t i = 0; i < v.size(); ++i) b += jtu[i] * v[i];
  EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
}

TEST(FeatureMap, StandardisationAppliesOffsetAndScale) {
  const int p = 16;
  FeatureMap m(p, 0.03, 2, 4);
  std::vector<double> rows;
  std::vector<std::vector<double>> patches;
  for (unsigned s = 0; s < 20; ++s) {
    patches.push_back(random_patch(p, 0.03, 100 + s));
    const auto f = m.evaluate(patches.back());
    rows.insert(rows.end(), f.begin(), f.end());
  }
  const auto raw0 = m.evaluate(patches[0]);
  m.standardize_from(rows, 20);
  ASSERT_TRUE(m.standardized());
  double mean0 = 0.0;
  for (const auto& x : patches) mean0 += m.evaluate(x)[1] / 20.0;
  EXPECT_NEAR(mean0, 0.0, 1e-12);
  const auto std0 = m.evaluate(patches[0]);
  for (std::size_t j = 0; j < m.dim(); ++j) {
    EXPECT_NEAR(std0[j], (raw0[j] - m.offset()[j]) / m.scale()[j], 1e-12);
  }
  m.clear_standardization();
  EXPECT_EQ(m.evaluate(patches[0]), raw0);
}

}  // namespace
}  // namespace nightnoise
