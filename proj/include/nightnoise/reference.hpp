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

// Straightforward single-threaded implementations of the hot kernels. They
// are kept as the oracle for the OpenMP paths (tests assert bit-identical
// output) and as the baseline in bench/.

#include <cstdint>
#include <span>
#include <vector>

#include "nightnoise/frames.hpp"
#include "nightnoise/noisegen.hpp"

namespace nightnoise::reference {

FrameBuffer synthesize_residual(const FrameBuffer& clean, const NoiseParams& params,
                                const ClipContext& ctx);

// Pooled histogram counts; values outside [lo, hi) land in the edge bins.
std::vector<std::uint64_t> histogram(std::span<const float> values, int bins, double lo, double hi);

}  // namespace nightnoise::reference
