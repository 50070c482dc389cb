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

#include "nightnoise/calibrate.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "json.hpp"
#include "nightnoise/virtual_sensor.hpp"

namespace nightnoise {
namespace {

std::vector<double> lambdas(const NoiseParams& p) {
  return {p.lambda_read, p.lambda_shot,  p.lambda_row,   p.lambda_row_t,
          p.lambda_quant, p.lambda_f[0], p.lambda_f[1], p.lambda_f[2]};
}

TEST(Calibrate, ZeroNoiseGivesZeroLambdas) {
  const FrameBuffer clean = render_scene(SceneKind::gradient, 128, 128);
  std::vector<PairedBurst> data;
  data.emplace_back(clean, std::vector<FrameBuffer>(8, clean), std::vector<std::size_t>{4, 4});
  const CalibrationReport rep = calibrate(data, {});
  for (double v : lambdas(rep.params)) EXPECT_LE(v, 1e-6);
  EXPECT_FALSE(rep.refinement.has_value());
}

TEST(Calibrate, SingleFrameClipMarksRowTNotIdentifiable) {
  VirtualSensorLayout layout;
  layout.width = 128;
  layout.height = 128;
  layout.clips = 1;
  layout.frames = 1;
  const NoiseParams truth = default_virtual_truth(layout, 4);
  const auto data = render_virtual_dataset(truth, layout);
  CalibrationConfig cfg;
  cfg.critic.steps = 5;
  const CalibrationReport rep = calibrate(data, cfg);
  EXPECT_FALSE(rep.row.row_t_identifiable);
  EXPECT_EQ(rep.moment_params.lambda_row_t, 0.0);
  bool warned = false;
  for (const auto& w : rep.warnings) warned |= w.find("not identifiable") != std::string::npos;
  EXPECT_TRUE(warned);
  const auto j = nlohmann::json::parse(calibration_report_json(rep));
  EXPECT_EQ(j["stages"]["row"]["lambda_row_t"], "not identifiable");
}

TEST(Calibrate, RejectsEmptyInputAndBadConfig) {
  EXPECT_THROW(calibrate(std::vector<PairedBurst>{}, {}), EstimationError);
  CalibrationConfig cfg;
  cfg.bit_depth = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Calibrate, BitDepthInitialisesQuantWhenKurtosisIsSilent) {
  VirtualSensorLayout layout;
  layout.width = 128;
  layout.height = 128;
  layout.clips = 2;
  layout.frames = 8;
  NoiseParams truth;
  truth.lambda_read = 2e-4;
  truth.lambda_shot = 1e-3;
  truth.seed = 5;
  const auto data = render_virtual_dataset(truth, layout);
  CalibrationConfig cfg;
  cfg.refine = false;
  cfg.bit_depth = 10;
  const CalibrationReport rep = calibrate(data, cfg);
  EXPECT_FALSE(rep.shot_read.quant_identified);
  EXPECT_DOUBLE_EQ(rep.params.lambda_quant, 1.0 / 1024.0);
}

TEST(Calibrate, RecoversDefaultVirtualSensor) {
  const VirtualSensorLayout layout;
  const NoiseParams truth = default_virtual_truth(layout, 11);
  const auto data = render_virtual_dataset(truth, layout);
  CalibrationConfig cfg;
  cfg.seed = 11;
  const CalibrationReport rep = calibrate(data, cfg);
  const auto est = lambdas(rep.params);
  const auto ref = lambdas(truth);
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_NEAR(est[i], ref[i], 0.2 * ref[i]) << gen_param_name(i);
  }
  ASSERT_TRUE(rep.refinement.has_value());
  EXPECT_FALSE(rep.refinement->diverged);
  EXPECT_LE(rep.kld_final, rep.kld_moment + 0.005);

  const auto j = nlohmann::json::parse(calibration_report_json(rep, "fixed_pattern.rfr"));
  EXPECT_EQ(j["trace"].size(), rep.refinement->trace.size());
  EXPECT_TRUE(j["trace"][0].contains("kld"));
  EXPECT_EQ(j["params"]["fixed_pattern"], "fixed_pattern.rfr");
  EXPECT_TRUE(j["stages"].contains("moments"));
}

}  // namespace
}  // namespace nightnoise
