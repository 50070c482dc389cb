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
#include <optional>
#include <string_view>
#include <vector>

#include "nightnoise/frames.hpp"
#include "nightnoise/noisegen.hpp"

namespace nightnoise {

// Procedural clean scenes with known ground-truth noise, used as the oracle
// for calibration and metric checks.
enum class SceneKind { gradient, checker, drift };

std::string_view scene_name(SceneKind kind);
std::optional<SceneKind> parse_scene(std::string_view name);

// Clean frame with values in [lo, hi]. `index` shifts the drifting pattern
// and the checker levels so bursts differ.
FrameBuffer render_scene(SceneKind kind, int width, int height, int index = 0, double lo = 0.2,
                         double hi = 0.8);

// i.i.d. N(0, sigma^2) residual-domain pattern.
FrameBuffer random_fixed_pattern(int width, int height, double sigma, std::uint64_t seed);

struct VirtualSensorLayout {
  int width = 256;
  int height = 256;
  int bursts = 1;
  int clips = 4;
  int frames = 64;
  SceneKind scene = SceneKind::gradient;
};

// Every component active at moderate magnitudes; the fixed pattern has
// std 0.008 and the geometry of `layout`.
NoiseParams default_virtual_truth(const VirtualSensorLayout& layout, std::uint64_t seed);

// One burst per scene index; clip ids run consecutively over all bursts.
std::vector<PairedBurst> render_virtual_dataset(const NoiseParams& truth, const VirtualSensorLayout& layout,
                                                Exec exec = Exec::parallel);

}  // namespace nightnoise
