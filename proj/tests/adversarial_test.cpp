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

#include "nightnoise/adversarial.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nightnoise/metrics.hpp"
#include "nightnoise/virtual_sensor.hpp"

namespace nightnoise {
namespace {

struct Fixture {
  NoiseParams truth;
  std::vector<PairedBurst> data;
  ResidualPatchSet real{64};
  FeatureMap features{64, 1.0};
};

Fixture small_fixture(std::uint64_t seed, int clips = 2, int frames = 4) {
  VirtualSensorLayout layout;
  layout.width = 128;
  layout.height = 128;
  layout.clips = clips;
  layout.frames = frames;
  Fixture f;
  f.truth = default_virtual_truth(layout, seed);
  f.data = render_virtual_dataset(f.truth, layout);
  f.real = extract_residuals(f.data, 64, 64);
  f.features = make_feature_map(f.real);
  std::vector<double> raw;
  for (std::size_t i = 0; i < f.real.size(); ++i) {
    const auto v = f.features.evaluate(f.real.patch(i));
    raw.insert(raw.end(), v.begin(), v.end());
  }
  f.features.standardize_from(raw, f.real.size());
  return f;
}

PatchBatch synth_batch(const Fixture& f, const NoiseParams& p, std::size_t count, std::uint64_t step) {
  const PatchGenerator gen(64, p.freqs);
  const auto samples = draw_generator_batch(f.real, p, gen, kRefineCriticClip, step, count);
  std::vector<double> px(count * gen.pixels());
  for (std::size_t b = 0; b < count; ++b) {
    gen.render(to_std_units(p), samples[b], std::span<double>(px).subspan(b * gen.pixels(), gen.pixels()));
  }
  return make_batch(f.features, std::move(px), count);
}

std::vector<double> random_weights(std::size_t d, double scale, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> w(d);
  for (auto& v : w) v = n(rng);
  return w;
}

TEST(WganLoss, ZeroCriticGivesPenaltyCoefficient) {
  const Fixture f = small_fixture(1);
  std::vector<std::size_t> idx = {0, 1, 2, 3};
  const PatchBatch real = gather_batch(f.features, f.real, idx);
  const PatchBatch synth = synth_batch(f, f.truth, 4, 0);
  CriticState c;
  c.gp_coeff = 10.0;
  const std::vector<double> t = {0.1, 0.5, 0.9, 0.3};
  const WganLoss l = wgan_gp_loss(real, synth, c, f.features, t);
  EXPECT_EQ(l.loss, 10.0);
  EXPECT_EQ(l.penalty, 10.0);
  const std::size_t d = f.features.dim();
  for (std::size_t j = 0; j < d; ++j) {
    double diff = 0.0;
    for (std::size_t b = 0; b < 4; ++b) diff += (synth.feature(b, d)[j] - real.feature(b, d)[j]) / 4.0;
    EXPECT_NEAR(l.critic_grad[j], diff, 1e-12);
  }
}

TEST(WganLoss, MeanOnlyCriticHasGradientNormWOver64) {
  const Fixture f = small_fixture(2);
  FeatureMap raw_map = f.features;
  raw_map.clear_standardization();
  std::vector<std::size_t> idx = {0, 1, 2};
  const PatchBatch real = gather_batch(raw_map, f.real, idx);
  std::vector<double> px(3 * 4096);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = 0.01 * std::sin(0.37 * static_cast<double>(i));
  const PatchBatch synth = make_batch(raw_map, px, 3);
  for (double w : {32.0, -16.0, 200.0}) {
    CriticState c;
    c.weights.assign(raw_map.dim(), 0.0);
    c.weights[0] = w;
    const WganLoss l = wgan_gp_loss(real, synth, c, raw_map, std::vector<double>{0.2, 0.7, 1.0});
    const double norm = std::abs(w) / 64.0;
    EXPECT_NEAR(l.penalty, 10.0 * (norm - 1.0) * (norm - 1.0), 1e-9) << "w=" << w;
  }
}

TEST(WganLoss, CriticGradientMatchesFiniteDifferences) {
  const Fixture f = small_fixture(3);
  std::vector<std::size_t> idx = {0, 2, 4, 6, 1, 3};
  const PatchBatch real = gather_batch(f.features, f.real, idx);
  NoiseParams off = f.truth;
  off.lambda_read *= 3.0;
  const PatchBatch synth = synth_batch(f, off, idx.size(), 7);
  const std::vector<double> t = {0.15, 0.35, 0.55, 0.75, 0.95, 0.05};
  for (unsigned trial = 0; trial < 3; ++trial) {
    CriticState c;
    c.weights = random_weights(f.features.dim(), 0.05, 20 + trial);
    const WganLoss l = wgan_gp_loss(real, synth, c, f.features, t);
    double worst = 0.0, gnorm = 0.0;
    for (double v : l.critic_grad) gnorm = std::max(gnorm, std::abs(v));
    const double h = 1e-6;
    for (std::size_t j = 0; j < c.weights.size(); ++j) {
      CriticState cp = c, cm = c;
      cp.weights[j] += h;
      cm.weights[j] -= h;
      const double fd =
          (wgan_gp_loss(real, synth, cp, f.features, t).loss - wgan_gp_loss(real, synth, cm, f.features, t).loss) /
          (2.0 * h);
      worst = std::max(worst, std::abs(fd - l.critic_grad[j]));
    }
    EXPECT_LT(worst / gnorm, 1e-5) << "trial " << trial;
  }
}

TEST(WganLoss, MatchedDistributionsGiveZeroGap) {
  // One frame per clip keeps every patch independent; synthetic patches are
  // drawn at the same origins so the clean content matches too.
  const Fixture f = small_fixture(4, 64, 1);
  const std::size_t n = 64;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i * 4 + i % 4;
  const PatchBatch real = gather_batch(f.features, f.real, idx);
  const auto like = synthesize_like(f.truth, f.real, 99);
  std::vector<double> px;
  for (std::size_t i : idx) px.insert(px.end(), like.begin() + static_cast<std::ptrdiff_t>(i * 4096),
                                      like.begin() + static_cast<std::ptrdiff_t>((i + 1) * 4096));
  const PatchBatch synth = make_batch(f.features, std::move(px), n);
  CriticState c;
  c.weights = random_weights(f.features.dim(), 0.1, 5);
  c.gp_coeff = 0.0;
  const WganLoss l = wgan_gp_loss(real, synth, c, f.features, {});
  const std::size_t d = f.features.dim();
  auto stats = [&](const PatchBatch& b) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j) v += c.weights[j] * b.feature(i, d)[j];
      s += v;
      s2 += v * v;
    }
    const double m = s / n;
    return std::pair{m, (s2 / n - m * m) / (n - 1)};
  };
  const auto [mr, vr] = stats(real);
  const auto [ms, vs] = stats(synth);
  EXPECT_NEAR(l.critic_gap, ms - mr, 1e-12);
  EXPECT_LT(std::abs(l.critic_gap), 3.0 * std::sqrt(vr + vs));
}

TEST(WganLoss, RejectsMismatchedInputs) {
  const Fixture f = small_fixture(5);
  std::vector<std::size_t> a = {0, 1}, b = {0, 1, 2};
  const PatchBatch ra = gather_batch(f.features, f.real, a);
  const PatchBatch rb = gather_batch(f.features, f.real, b);
  CriticState c;
  EXPECT_THROW(wgan_gp_loss(ra, rb, c, f.features, std::vector<double>{0.5}), std::invalid_argument);
  c.weights.assign(3, 0.0);
  EXPECT_THROW(wgan_gp_loss(ra, ra, c, f.features, std::vector<double>{0.5}), std::invalid_argument);
  c.weights.assign(f.features.dim(), std::nan(""));
  EXPECT_THROW(wgan_gp_loss(ra, ra, c, f.features, std::vector<double>{0.5}), std::invalid_argument);
  CriticState neg;
  neg.gp_coeff = -1.0;
  EXPECT_THROW(neg.validate(f.features.dim()), std::invalid_argument);
}

TEST(Generator, StdUnitRoundTrip) {
  NoiseParams p;
  p.lambda_read = 4e-4;
  p.lambda_shot = 9e-4;
  p.lambda_row = 1e-4;
  p.lambda_row_t = 2.5e-5;
  p.lambda_quant = 0.03;
  p.lambda_f = {0.01, 0.02, 0.03};
  const GenVector v = to_std_units(p);
  EXPECT_DOUBLE_EQ(v[0], 0.02);
  EXPECT_DOUBLE_EQ(v[1], 0.03);
  NoiseParams q;
  apply_std_units(v, q);
  EXPECT_NEAR(q.lambda_read, p.lambda_read, 1e-18);
  EXPECT_NEAR(q.lambda_row_t, p.lambda_row_t, 1e-18);
  EXPECT_EQ(q.lambda_f, p.lambda_f);
  EXPECT_EQ(gen_param_name(4), "lambda_quant");
}

TEST(Generator, RenderJacobianMatchesFiniteDifferences) {
  const Fixture f = small_fixture(6);
  const PatchGenerator gen(64, f.truth.freqs);
  const auto samples = draw_generator_batch(f.real, f.truth, gen, kRefineGeneratorClip, 0, 1);
  const GenVector p = to_std_units(f.truth);
  const std::size_t n = gen.pixels();
  std::vector<double> y(n), jac(kGenParams * n), yp(n), ym(n);
  gen.render(p, samples[0], y, jac);
  for (std::size_t k = 0; k < kGenParams; ++k) {
    const double h = 1e-7;
    GenVector pp = p, pm = p;
    pp[k] += h;
    pm[k] -= h;
    gen.render(pp, samples[0], yp);
    gen.render(pm, samples[0], ym);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs((yp[i] - ym[i]) / (2.0 * h) - jac[k * n + i]));
      scale = std::max(scale, std::abs(jac[k * n + i]));
    }
    EXPECT_LT(worst, 1e-6 * scale) << gen_param_name(k);
  }
}

TEST(Generator, LambdaGradientMatchesCommonRandomNumberDifferences) {
  const Fixture f = small_fixture(7);
  const PatchGenerator gen(64, f.truth.freqs);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  for (int point = 0; point < 3; ++point) {
    NoiseParams p = f.truth;
    p.lambda_read *= scale(rng);
    p.lambda_shot *= scale(rng);
    p.lambda_row *= scale(rng);
    p.lambda_row_t *= scale(rng);
    p.lambda_quant *= scale(rng);
    for (auto& v : p.lambda_f) v *= scale(rng);
    const auto batch = draw_generator_batch(f.real, p, gen, kRefineGeneratorClip, static_cast<std::uint64_t>(point), 8);
    CriticState c;
    c.weights = random_weights(f.features.dim(), 0.1, 300 + static_cast<unsigned>(point));
    const GeneratorObjective obj = generator_objective(p, batch, gen, c, f.features);

    auto lambda_ref = [](NoiseParams& q, std::size_t i) -> double& {
      switch (i) {
        case 0: return q.lambda_read;
        case 1: return q.lambda_shot;
        case 2: return q.lambda_row;
        case 3: return q.lambda_row_t;
        case 4: return q.lambda_quant;
        default: return q.lambda_f[i - 5];
      }
    };
    for (std::size_t i = 0; i < kGenParams; ++i) {
      NoiseParams qp = p, qm = p;
      const double h = 1e-5 * lambda_ref(qp, i);
      lambda_ref(qp, i) += h;
      lambda_ref(qm, i) -= h;
      // Same samples (and therefore the same normals and uniforms) on both sides.
      const double fd = (generator_objective(qp, batch, gen, c, f.features).value -
                         generator_objective(qm, batch, gen, c, f.features).value) /
                        (2.0 * h);
      EXPECT_LT(std::abs(fd - obj.grad_lambda[i]), 1e-3 * std::abs(obj.grad_lambda[i]))
          << "point " << point << " " << gen_param_name(i) << " fd " << fd << " analytic " << obj.grad_lambda[i];
    }
  }
}

TEST(Generator, ClippedPixelsPassNoGradient) {
  const PatchGenerator gen(4, {0.5, 0.25, 0.125});
  GeneratorSample s;
  s.clean.assign(16, 0.999);
  s.draw.z.assign(16, 3.0);
  s.draw.u.assign(16, 0.5);
  s.draw.row.assign(4, 0.0);
  s.draw.row_t.assign(4, 0.0);
  GenVector p{};
  p[0] = 0.01;
  std::vector<double> y(16), jac(kGenParams * 16);
  gen.render(p, s, y, jac);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(y[i], 0.001, 1e-12);
    EXPECT_EQ(jac[i], 0.0);
  }
}

TEST(Refine, StaysNonNegativeAndDoesNotDegradeTruth) {
  const Fixture f = small_fixture(8, 4, 16);
  CriticState c;
  c.steps = 60;
  const auto before = kld(f.real.values(), synthesize_like(f.truth, f.real, 5));
  const RefineResult r = refine_params(f.truth, f.real, c, f.features);
  EXPECT_FALSE(r.diverged);
  EXPECT_EQ(r.steps_run, 60);
  const NoiseParams& q = r.params;
  for (double v : {q.lambda_read, q.lambda_shot, q.lambda_row, q.lambda_row_t, q.lambda_quant, q.lambda_f[0],
                   q.lambda_f[1], q.lambda_f[2]}) {
    EXPECT_GE(v, 0.0);
  }
  ASSERT_TRUE(q.fixed_pattern.has_value());
  EXPECT_EQ(q.fixed_pattern->data()[17], f.truth.fixed_pattern->data()[17]);
  const auto after = kld(f.real.values(), synthesize_like(q, f.real, 5));
  EXPECT_LE(after, before + 0.005);
  EXPECT_EQ(r.trace.size(), 6u);
}

TEST(Refine, ZeroStartStaysNonNegative) {
  const Fixture f = small_fixture(9);
  NoiseParams init = f.truth;
  init.lambda_f = {0.0, 0.0, 0.0};
  init.lambda_quant = 0.0;
  CriticState c;
  c.steps = 20;
  c.gen_lr = 0.5;
  const RefineResult r = refine_params(init, f.real, c, f.features);
  for (double v : {r.params.lambda_quant, r.params.lambda_f[0], r.params.lambda_f[1], r.params.lambda_f[2]}) {
    EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Refine, DivergenceKeepsLastFiniteIterate) {
  const Fixture f = small_fixture(10);
  CriticState c;
  c.steps = 10;
  c.critic_lr = 1e300;
  const RefineResult r = refine_params(f.truth, f.real, c, f.features);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.warnings.empty());
  for (double v : {r.params.lambda_read, r.params.lambda_shot, r.params.lambda_row, r.params.lambda_quant}) {
    EXPECT_TRUE(std::isfinite(v));
  }
}

}  // namespace
}  // namespace nightnoise
