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

#include "nightnoise/virtual_sensor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nightnoise/rng.hpp"

namespace nightnoise {

std::string_view scene_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::gradient: return "gradient";
    case SceneKind::checker: return "checker";
    case SceneKind::drift: return "drift";
  }
  return "?";
}

std::optional<SceneKind> parse_scene(std::string_view name) {
  for (auto k : {SceneKind::gradient, SceneKind::checker, SceneKind::drift}) {
    if (scene_name(k) == name) return k;
  }
  return std::nullopt;
}

FrameBuffer render_scene(SceneKind kind, int width, int height, int index, double lo, double hi) {
  if (width <= 1 || height <= 1) throw std::invalid_argument("scene must be at least 2x2");
  std::vector<float> px(static_cast<std::size_t>(width) * height);
  const double span = hi - lo;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double t = 0.0;
      switch (kind) {
        case SceneKind::gradient:
          t = (static_cast<double>(c) / (width - 1) + static_cast<double>(r) / (height - 1)) / 2.0;
          break;
        case SceneKind::checker: {
          const int level = ((r / 16) * 7 + (c / 16) * 3 + index * 5) % 8;
          t = level / 7.0;
          break;
        }
        case SceneKind::drift:
          t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (c / 64.0 + 0.1 * index)) *
                        std::cos(2.0 * std::numbers::pi * r / 96.0);
          break;
      }
      px[static_cast<std::size_t>(r) * width + c] = static_cast<float>(lo + span * t);
    }
  }
  return FrameBuffer(width, height, std::move(px), Domain::clipped);
}

FrameBuffer random_fixed_pattern(int width, int height, double sigma, std::uint64_t seed) {
  const NoiseStream s{seed, 0, kClipLevelFrame, StreamComponent::pattern};
  std::vector<float> px(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(sigma * s.normal(i));
  return FrameBuffer(width, height, std::move(px), Domain::residual);
}

NoiseParams default_virtual_truth(const VirtualSensorLayout& layout, std::uint64_t seed) {
  NoiseParams p;
  p.lambda_read = 2e-4;
  p.lambda_shot = 1e-3;
  p.lambda_row = 1e-4;
  p.lambda_row_t = 5e-5;
  p.lambda_quant = 0.04;
  p.lambda_f = {0.01, 0.008, 0.006};
  p.fixed_pattern = random_fixed_pattern(layout.width, layout.height, 0.008, seed ^ 0x5eedf00dull);
  p.seed = seed;
  return p;
}

std::vector<PairedBurst> render_virtual_dataset(const NoiseParams& truth, const VirtualSensorLayout& layout,
                                                Exec exec) {
  if (layout.bursts <= 0 || layout.clips <= 0 || layout.frames <= 0) {
    throw std::invalid_argument("virtual sensor needs positive burst, clip and frame counts");
  }
  std::vector<PairedBurst> out;
  std::uint64_t clip_id = 0;
  for (int b = 0; b < layout.bursts; ++b) {
    FrameBuffer clean = render_scene(layout.scene, layout.width, layout.height, b);
    std::vector<FrameBuffer> noisy;
    noisy.reserve(static_cast<std::size_t>(layout.clips) * layout.frames);
    for (int k = 0; k < layout.clips; ++k) {
      const Clip still(std::vector<FrameBuffer>(static_cast<std::size_t>(layout.frames), clean));
      Clip synth = synthesize_clip(still, truth, clip_id++, exec);
      for (auto& f : synth.frames) noisy.push_back(std::move(f));
    }
    out.emplace_back(std::move(clean), std::move(noisy),
                     std::vector<std::size_t>(static_cast<std::size_t>(layout.clips),
                                              static_cast<std::size_t>(layout.frames)));
  }
  return out;
}

}  // namespace nightnoise
