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

#include "nightnoise/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "nightnoise/patches.hpp"
#include "nightnoise/virtual_sensor.hpp"

namespace nightnoise {
namespace {

std::vector<PairedBurst> virtual_data(const NoiseParams& p, int w, int h, int clips, int frames,
                                      SceneKind scene = SceneKind::gradient) {
  VirtualSensorLayout layout;
  layout.width = w;
  layout.height = h;
  layout.clips = clips;
  layout.frames = frames;
  layout.scene = scene;
  return render_virtual_dataset(p, layout);
}

double rel_err(double est, double truth) { return std::abs(est - truth) / truth; }

TEST(ExtractResiduals, NoiselessGivesZeroPatches) {
  const FrameBuffer clean = render_scene(SceneKind::checker, 128, 128);
  const PairedBurst b(clean, {clean, clean});
  const auto set = extract_residuals(b, 64, 64);
  EXPECT_EQ(set.size(), 8u);
  for (float v : set.values()) EXPECT_EQ(v, 0.0f);
}

TEST(ExtractResiduals, TileCountsAndIntensity) {
  const FrameBuffer clean = FrameBuffer::filled(256, 256, 0.25f, Domain::clipped);
  const PairedBurst b(clean, std::vector<FrameBuffer>(16, clean));
  const auto set = extract_residuals(b, 64, 64);
  EXPECT_EQ(set.size(), 256u);
  EXPECT_DOUBLE_EQ(set.source_intensity(17), 0.25);
  EXPECT_EQ(set.patch(3).size(), 64u * 64u);
  const PairedBurst one(FrameBuffer::filled(128, 128, 0.f, Domain::clipped),
                        {FrameBuffer::filled(128, 128, 0.f, Domain::clipped)});
  EXPECT_EQ(extract_residuals(one, 64, 64).size(), 4u);
}

TEST(ExtractResiduals, PatchLargerThanFrameThrows) {
  const FrameBuffer clean = FrameBuffer::filled(32, 32, 0.f, Domain::clipped);
  EXPECT_THROW(extract_residuals(PairedBurst(clean, {clean}), 64, 64), std::invalid_argument);
}

TEST(ShotRead, ZeroNoiseGivesZero) {
  const auto data = virtual_data(NoiseParams{}, 64, 64, 1, 4);
  const auto est = estimate_shot_read(data);
  EXPECT_EQ(est.read, 0.0);
  EXPECT_EQ(est.shot, 0.0);
  EXPECT_FALSE(est.quant_identified);
}

TEST(ShotRead, RecoversReadAndShot) {
  NoiseParams p;
  p.lambda_read = 2e-4;
  p.lambda_shot = 1e-3;
  p.seed = 3;
  const auto est = estimate_shot_read(virtual_data(p, 128, 128, 2, 16));
  EXPECT_LT(rel_err(est.read, 2e-4), 0.10) << est.read;
  EXPECT_LT(rel_err(est.shot, 1e-3), 0.10) << est.shot;
  EXPECT_FALSE(est.quant_identified);
}

TEST(ShotRead, ConstantIntensityIsSingular) {
  const FrameBuffer clean = FrameBuffer::filled(64, 64, 0.5f, Domain::clipped);
  NoiseParams p;
  p.lambda_read = 1e-4;
  const Clip noisy = synthesize_clip(Clip(std::vector<FrameBuffer>(4, clean)), p, 0);
  try {
    estimate_shot_read(std::vector<PairedBurst>{PairedBurst(clean, noisy.frames)});
    FAIL();
  } catch (const EstimationError& e) {
    EXPECT_EQ(e.code(), EstimationErrc::insufficient_diversity);
  }
}

TEST(ShotRead, QuantisationIdentifiedThroughFourthCumulant) {
  NoiseParams p;
  p.lambda_read = 2e-4;
  p.lambda_shot = 1e-3;
  p.lambda_quant = 0.04;
  p.seed = 8;
  const auto est = estimate_shot_read(virtual_data(p, 256, 256, 1, 64));
  ASSERT_TRUE(est.quant_identified);
  EXPECT_LT(rel_err(est.quant, 0.04), 0.10) << est.quant;
  EXPECT_LT(rel_err(est.read, 2e-4), 0.10) << est.read;
  EXPECT_NEAR(est.fourth_cumulant, -std::pow(0.04, 4) / 120.0, 4.0 * est.fourth_cumulant_stderr);
}

TEST(ShotRead, ConsistentAsFramesGrow) {
  NoiseParams p;
  p.lambda_read = 2e-4;
  p.lambda_shot = 1e-3;
  std::vector<double> medians;
  for (int n : {16, 128, 1024}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      p.seed = 100 + seed;
      const auto est = estimate_shot_read(virtual_data(p, 32, 32, 1, n));
      errs.push_back(std::abs(est.read - p.lambda_read) + std::abs(est.shot - p.lambda_shot));
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    medians.push_back(errs[5]);
  }
  EXPECT_GE(medians[0], medians[1]);
  EXPECT_GE(medians[1], medians[2]);
}

TEST(Row, ZeroNoiseGivesZero) {
  const auto est = estimate_row(virtual_data(NoiseParams{}, 64, 64, 2, 4));
  EXPECT_EQ(est.row, 0.0);
  EXPECT_EQ(est.row_t, 0.0);
}

TEST(Row, RecoversBothBandingTerms) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.lambda_shot = 5e-4;
  p.lambda_row = 5e-4;
  p.lambda_row_t = 2e-4;
  p.seed = 21;
  const auto est = estimate_row(virtual_data(p, 256, 256, 4, 16));
  EXPECT_LT(rel_err(est.row, 5e-4), 0.15) << est.row;
  EXPECT_LT(rel_err(est.row_t, 2e-4), 0.15) << est.row_t;
}

TEST(Row, NullClipConstantTerm) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.lambda_row = 5e-4;
  p.seed = 22;
  const auto est = estimate_row(virtual_data(p, 256, 256, 4, 16));
  EXPECT_LE(est.row_t, 0.1 * est.row);
}

TEST(Row, SingleClipFallsBackAcrossRows) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.lambda_row = 5e-4;
  p.lambda_row_t = 2e-4;
  p.seed = 23;
  const auto est = estimate_row(virtual_data(p, 256, 256, 1, 16));
  EXPECT_FALSE(est.warnings.empty());
  EXPECT_LT(rel_err(est.row_t, 2e-4), 0.3) << est.row_t;
}

TEST(Row, SingleFrameClipsOnlyIsAnError) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  try {
    estimate_row(virtual_data(p, 64, 64, 3, 1));
    FAIL();
  } catch (const EstimationError& e) {
    EXPECT_EQ(e.code(), EstimationErrc::single_frame_clips);
  }
}

TEST(Periodic, ZeroNoiseGivesZero) {
  const auto est = estimate_periodic(virtual_data(NoiseParams{}, 64, 64, 1, 4), {0.5, 0.25, 0.125});
  EXPECT_EQ(est.lambda_f, (std::array<double, 3>{0, 0, 0}));
}

TEST(Periodic, RecoversNyquistTerm) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.lambda_f = {0.01, 0.0, 0.0};
  p.seed = 31;
  const auto est = estimate_periodic(virtual_data(p, 128, 64, 4, 64), p.freqs);
  EXPECT_LT(rel_err(est.lambda_f[0], 0.01), 0.15) << est.lambda_f[0];
  EXPECT_LE(est.lambda_f[1], 0.002);
  EXPECT_LE(est.lambda_f[2], 0.002);
  EXPECT_TRUE(est.warnings.empty());
}

TEST(Periodic, ReadNoiseAloneStaysBelowFloor) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.seed = 32;
  const auto est = estimate_periodic(virtual_data(p, 128, 64, 2, 16), p.freqs);
  for (double v : est.lambda_f) EXPECT_LE(v, 1e-3);
}

TEST(Periodic, MisalignedFrequencyWarns) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  const auto est = estimate_periodic(virtual_data(p, 100, 64, 1, 4), {0.5, 0.25, 0.125});
  EXPECT_FALSE(est.warnings.empty());
}

TEST(FixedPattern, ExactWithoutStochasticNoise) {
  const FrameBuffer clean = FrameBuffer::filled(4, 2, 0.5f, Domain::clipped);
  const std::vector<float> pat = {0.125f, -0.25f, 0.f, 0.0625f, -0.5f, 0.25f, 0.375f, -0.125f};
  std::vector<float> noisy_px(8);
  for (std::size_t i = 0; i < 8; ++i) noisy_px[i] = 0.5f + pat[i];
  const FrameBuffer noisy(4, 2, noisy_px, Domain::clipped);
  const FrameBuffer est = estimate_fixed_pattern(std::vector<PairedBurst>{PairedBurst(clean, {noisy, noisy, noisy})});
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(est.data()[i], pat[i]);
  EXPECT_EQ(est.domain(), Domain::residual);
}

TEST(FixedPattern, StandardErrorMatchesOneOverRootN) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.fixed_pattern = random_fixed_pattern(32, 32, 0.01, 5);
  p.seed = 41;
  const auto data = virtual_data(p, 32, 32, 1, 1000);
  const FrameBuffer est = estimate_fixed_pattern(data);
  double s2 = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = est.data()[i] - p.fixed_pattern->data()[i];
    s2 += d * d;
  }
  const double sd = std::sqrt(s2 / static_cast<double>(est.size()));
  EXPECT_NEAR(sd, std::sqrt(1e-4 / 1000), 0.1 * std::sqrt(1e-4 / 1000));
}

TEST(FixedPattern, ZeroResidualAndGeometryMismatch) {
  const FrameBuffer a = FrameBuffer::filled(4, 4, 0.3f, Domain::clipped);
  const FrameBuffer b = FrameBuffer::filled(8, 4, 0.3f, Domain::clipped);
  const FrameBuffer z = estimate_fixed_pattern(std::vector<PairedBurst>{PairedBurst(a, {a, a})});
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(estimate_fixed_pattern(std::vector<PairedBurst>{PairedBurst(a, {a}), PairedBurst(b, {b})}),
               EstimationError);
  EXPECT_THROW(estimate_fixed_pattern(std::vector<PairedBurst>{PairedBurst(a, {a})}), EstimationError);
}

TEST(FullModel, MomentEstimatesOnDefaultVirtualSensor) {
  VirtualSensorLayout layout;
  const NoiseParams truth = default_virtual_truth(layout, 1);
  const auto data = render_virtual_dataset(truth, layout);
  const auto sr = estimate_shot_read(data);
  const auto row = estimate_row(data, sr);
  const auto per = estimate_periodic(data, truth.freqs, sr);
  EXPECT_LT(rel_err(sr.read, truth.lambda_read), 0.2) << sr.read;
  EXPECT_LT(rel_err(sr.shot, truth.lambda_shot), 0.2) << sr.shot;
  EXPECT_LT(rel_err(sr.quant, truth.lambda_quant), 0.2) << sr.quant;
  EXPECT_LT(rel_err(row.row, truth.lambda_row), 0.2) << row.row;
  EXPECT_LT(rel_err(row.row_t, truth.lambda_row_t), 0.2) << row.row_t;
  for (int k = 0; k < 3; ++k) EXPECT_LT(rel_err(per.lambda_f[k], truth.lambda_f[k]), 0.2) << k << " " << per.lambda_f[k];
}

}  // namespace
}  // namespace nightnoise
