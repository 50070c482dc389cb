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

#include "nightnoise/pipeline.hpp"

#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "nightnoise/metrics.hpp"
#include "nightnoise/virtual_sensor.hpp"
#include "test_util.hpp"

namespace nightnoise {
namespace {

FrameBuffer frame_from(int w, int h, auto fn, Domain domain = Domain::clipped) {
  std::vector<float> v(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) v[static_cast<std::size_t>(r) * w + c] = static_cast<float>(fn(r, c));
  }
  return FrameBuffer(w, h, std::move(v), domain);
}

double plane_mean(const Raster& p) {
  double s = 0.0;
  for (float v : p.data) s += v;
  return s / static_cast<double>(p.data.size());
}

TEST(Demosaic, ConstantStaysConstant) {
  const auto planes = demosaic(FrameBuffer::filled(16, 12, 0.37f, Domain::clipped));
  for (const auto& p : planes) {
    ASSERT_EQ(p.width, 16);
    ASSERT_EQ(p.height, 12);
    for (float v : p.data) ASSERT_EQ(v, 0.37f);
  }
}

TEST(Demosaic, ExactOnLinearRampsAwayFromBorders) {
  const int w = 32, h = 24;
  const auto ramp = [](int r, int c) { return 0.1 + 0.02 * c + 0.01 * r; };
  const auto planes = demosaic(frame_from(w, h, ramp));
  for (const auto& p : planes) {
    for (int r = 2; r < h - 2; ++r) {
      for (int c = 2; c < w - 2; ++c) ASSERT_NEAR(p.at(r, c), ramp(r, c), 1e-6) << r << "," << c;
    }
  }
}

TEST(Demosaic, SingleSiteStaysInItsChannel) {
  const CfaLayout layout;
  const auto [sr, sc] = layout.site(Channel::R);
  const auto planes = demosaic(frame_from(8, 8, [&](int r, int c) { return (r == 4 + sr && c == 4 + sc) ? 1.0 : 0.0; }));
  EXPECT_GT(plane_mean(planes[static_cast<std::size_t>(Channel::R)]), 0.0);
  for (Channel ch : {Channel::G, Channel::B, Channel::NIR}) EXPECT_EQ(plane_mean(planes[static_cast<std::size_t>(ch)]), 0.0);
}

TEST(Demosaic, RejectsResidualFrames) {
  EXPECT_THROW(demosaic(FrameBuffer::filled(4, 4, -0.1f, Domain::residual)), FrameError);
}

PlaneImage flat_planes(std::array<float, 4> v, int w = 8, int h = 8) {
  PlaneImage img;
  for (std::size_t k = 0; k < 4; ++k) img[k] = Raster(w, h, v[k]);
  return img;
}

TEST(WhiteBalance, EqualMeansAreIdentity) {
  const auto img = flat_planes({0.3f, 0.3f, 0.3f, 0.9f});
  const auto out = white_balance(img, {});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(out[k].data, img[k].data);
}

TEST(WhiteBalance, GrayWorldGains) {
  const auto img = flat_planes({0.2f, 0.4f, 0.4f, 0.1f});
  const auto gains = gray_world_gains(img, false);
  EXPECT_NEAR(gains[0], 5.0 / 3.0, 1e-7);
  EXPECT_NEAR(gains[1], 5.0 / 6.0, 1e-7);
  EXPECT_EQ(gains[3], 1.0);
  const auto out = white_balance(img, {});
  const double before = (0.2 + 0.4 + 0.4) / 3.0;
  const double after = (plane_mean(out[0]) + plane_mean(out[1]) + plane_mean(out[2])) / 3.0;
  EXPECT_NEAR(after, before, 1e-6);
}

TEST(WhiteBalance, ZeroPlaneIsAnError) {
  EXPECT_THROW(white_balance(flat_planes({0.0f, 0.4f, 0.4f, 0.4f}), {}), std::invalid_argument);
  IspConfig explicit_gains;
  explicit_gains.gray_world = false;
  explicit_gains.wb_gains = {2.0, 1.0, 1.0, 1.0};
  const auto out = white_balance(flat_planes({0.6f, 0.4f, 0.4f, 0.4f}), explicit_gains);
  EXPECT_EQ(out[0].data[0], 1.0f);  // clipped
}

TEST(Equalize, UniformIsNearIdentity) {
  Raster p(256, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 256; ++c) p.at(r, c) = (c + 0.5f) / 256.0f;
  }
  const Raster e = equalize(p);
  for (std::size_t i = 0; i < p.data.size(); ++i) EXPECT_LE(std::abs(e.data[i] - p.data[i]), 1.0 / 256.0);
}

TEST(Equalize, TwoLevelsMapToHalfAndOne) {
  Raster p(10, 10);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = i % 2 ? 0.8f : 0.2f;
  const Raster e = equalize(p);
  for (std::size_t i = 0; i < p.data.size(); ++i) EXPECT_FLOAT_EQ(e.data[i], i % 2 ? 1.0f : 0.5f);
}

TEST(Equalize, ConstantAndMonotone) {
  const Raster c = equalize(Raster(6, 6, 0.4f));
  for (float v : c.data) EXPECT_EQ(v, c.data[0]);
  const FrameBuffer scene = render_scene(SceneKind::drift, 64, 64);
  Raster p(64, 64);
  p.data.assign(scene.data().begin(), scene.data().end());
  const Raster e = equalize(p);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    for (std::size_t j = i + 1; j < p.data.size(); j += 97) {
      if (p.data[i] < p.data[j]) {
        ASSERT_LE(e.data[i], e.data[j]);
      }
    }
  }
}

TEST(Gamma, KnownValuesAndInverse) {
  const FrameBuffer f = frame_from(4, 2, [](int r, int c) { return r == 0 ? (c == 0 ? 0.0 : c == 1 ? 1.0 : 0.25) : 0.7; });
  const FrameBuffer g = gamma_encode(f, 1.0 / 2.2);
  EXPECT_EQ(g.at(0, 0), 0.0f);
  EXPECT_EQ(g.at(0, 1), 1.0f);
  EXPECT_NEAR(g.at(0, 2), 0.5326, 1e-4);
  const FrameBuffer back = gamma_encode(g, 2.2);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(back.data()[i], f.data()[i], 1e-6);
}

TEST(Unprocess, GrayMapsToInverseGamma) {
  const std::array<Raster, 3> gray = {Raster(8, 8, 0.5f), Raster(8, 8, 0.5f), Raster(8, 8, 0.5f)};
  const FrameBuffer raw = unprocess(gray, CfaLayout(), {});
  for (float v : raw.data()) EXPECT_NEAR(v, std::pow(0.5, 2.2), 1e-6);
  EXPECT_NEAR(raw.data()[0], 0.2176, 1e-4);
  const std::array<Raster, 3> black = {Raster(8, 8, 0.0f), Raster(8, 8, 0.0f), Raster(8, 8, 0.0f)};
  const FrameBuffer dark = unprocess(black, CfaLayout(), {});
  for (float v : dark.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Unprocess, RoundTripThroughIsp) {
  IspConfig cfg;
  cfg.gray_world = false;
  cfg.wb_gains = {1.5, 1.0, 2.0, 1.0};
  cfg.equalize = false;
  const std::array<Raster, 3> display = {Raster(16, 16, 0.6f), Raster(16, 16, 0.45f), Raster(16, 16, 0.3f)};
  const auto out = isp(unprocess(display, CfaLayout(), cfg), cfg);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    for (float v : out[k].data) EXPECT_NEAR(v, display[k].data[0], 1e-3);
  }
}

TEST(Isp, NirOnlyWhenRequested) {
  const FrameBuffer raw = FrameBuffer::filled(8, 8, 0.3f, Domain::clipped);
  EXPECT_EQ(isp(raw, {}).size(), 3u);
  IspConfig cfg;
  cfg.nir_in_display = true;
  EXPECT_EQ(isp(raw, cfg).size(), 4u);
}

Clip still_clip(std::size_t n, int w = 32, int h = 32) {
  return Clip(std::vector<FrameBuffer>(n, render_scene(SceneKind::gradient, w, h)));
}

TEST(TrainingPairs, WindowCounts) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  EXPECT_EQ(make_training_pairs(still_clip(5), p, 0).size(), 1u);
  const auto pairs = make_training_pairs(still_clip(9), p, 0);
  ASSERT_EQ(pairs.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(pairs[k].window_center_index, k + 2);
    EXPECT_EQ(pairs[k].noisy_window.size(), 5u);
  }
  EXPECT_THROW(make_training_pairs(still_clip(4), p, 0), std::invalid_argument);
}

TEST(TrainingPairs, WindowsAreSubsequencesOfOneSynthesis) {
  NoiseParams p;
  p.lambda_read = 1e-4;
  p.lambda_row_t = 1e-4;
  p.seed = 3;
  const Clip clean = still_clip(8);
  const Clip noisy = synthesize_clip(clean, p, 7);
  const auto pairs = make_training_pairs(clean, p, 7);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(pairs[k].noisy_window[i], noisy[k + i]);
  }
}

TEST(TrainingPairs, ZeroParamsGiveCleanWindows) {
  const Clip clean = still_clip(6);
  const auto pairs = make_training_pairs(clean, NoiseParams{}, 0);
  for (const auto& pr : pairs) {
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(pr.noisy_window[i].data()[5], clean[0].data()[5]);
    EXPECT_EQ(pr.clean_target, gamma_encode(clean[pr.window_center_index], 1.0 / 2.2));
  }
}

TEST(TrainingPairs, ExportLayout) {
  testing::TempDir tmp;
  NoiseParams p;
  p.lambda_read = 1e-4;
  write_training_pairs(make_training_pairs(still_clip(6), p, 0), tmp.path());
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "pair_000001" / "noisy_4.rfr"));
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "pair_000000" / "target.rfr"));
  EXPECT_FALSE(std::filesystem::exists(tmp.path() / "pair_000002"));
}

TEST(ReferenceDenoise, NoiselessAndFixedPatternOnlyAreExact) {
  const Clip clean = still_clip(4);
  EXPECT_EQ(reference_denoise(clean, NoiseParams{}), clean[0]);

  // Dyadic values keep every sum exact.
  const FrameBuffer base = FrameBuffer::filled(16, 16, 0.5f, Domain::clipped);
  const FrameBuffer pattern = frame_from(16, 16, [](int r, int c) { return ((r * 3 + c) % 5 - 2) / 64.0; }, Domain::residual);
  std::vector<float> noisy(base.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = base.data()[i] + pattern.data()[i];
  NoiseParams p;
  p.fixed_pattern = pattern;
  const Clip clip(std::vector<FrameBuffer>(3, FrameBuffer(16, 16, noisy, Domain::clipped)));
  EXPECT_EQ(reference_denoise(clip, p), base);
  EXPECT_THROW(reference_denoise(Clip{}, p), std::invalid_argument);
}

TEST(ReferenceDenoise, AveragingGainFollowsFrameCount) {
  NoiseParams p;
  p.lambda_read = 4e-4;
  p.seed = 21;
  const FrameBuffer scene = FrameBuffer::filled(128, 128, 0.5f, Domain::clipped);
  const Clip noisy = synthesize_clip(Clip(std::vector<FrameBuffer>(16, scene)), p, 0);
  const double single = psnr(noisy[0], scene);
  const double avg = psnr(reference_denoise(noisy, p), scene);
  EXPECT_NEAR(avg - single, 10.0 * std::log10(16.0), 1.0);
}

TEST(Display, PpmHeaderAndBytes) {
  Raster r(2, 1, 1.0f), g(2, 1, 0.0f), b(2, 1, 0.5f);
  const auto bytes = encode_ppm(r, g, b);
  const std::string head(bytes.begin(), bytes.begin() + 11);
  EXPECT_EQ(head, "P6\n2 1\n255\n");
  ASSERT_EQ(bytes.size(), 11u + 6u);
  EXPECT_EQ(bytes[11], 255);
  EXPECT_EQ(bytes[12], 0);
  EXPECT_EQ(bytes[13], 128);
}

}  // namespace
}  // namespace nightnoise
