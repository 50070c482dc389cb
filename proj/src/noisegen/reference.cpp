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

#include "nightnoise/reference.hpp"

#include <cmath>
#include <numbers>

namespace nightnoise::reference {

FrameBuffer synthesize_residual(const FrameBuffer& clean, const NoiseParams& p, const ClipContext& ctx) {
  const int w = clean.width();
  const int h = clean.height();
  const NoiseStream s{p.seed, ctx.clip_id, ctx.frame_id, StreamComponent::shot_read};

  std::vector<double> cols(static_cast<std::size_t>(w), 0.0);
  const NoiseStream sp = s.with(StreamComponent::periodic);
  for (std::size_t k = 0; k < 3; ++k) {
    if (p.lambda_f[k] == 0.0) continue;
    const double amp = p.lambda_f[k] * sp.normal(2 * k);
    const double phase = 2.0 * std::numbers::pi * sp.uniform(2 * k + 1);
    for (int c = 0; c < w; ++c) {
      cols[static_cast<std::size_t>(c)] += amp * std::cos(2.0 * std::numbers::pi * p.freqs[k] * c + phase);
    }
  }

  std::vector<float> out(clean.size());
  const NoiseStream srow = s.with(StreamComponent::row);
  const NoiseStream squant = s.with(StreamComponent::quant);
  for (int r = 0; r < h; ++r) {
    const double row = p.lambda_row == 0.0 ? 0.0 : std::sqrt(p.lambda_row) * srow.normal(static_cast<std::uint64_t>(r));
    for (int c = 0; c < w; ++c) {
      const auto i = static_cast<std::size_t>(r) * w + c;
      double n = 0.0;
      const double var = p.lambda_read + p.lambda_shot * clean.data()[i];
      if ((p.lambda_read != 0.0 || p.lambda_shot != 0.0) && var > 0.0) {
        n += static_cast<float>(std::sqrt(var) * s.normal(i));
      }
      n += static_cast<float>(row);
      if (ctx.clip_row_offsets.size() != 0) n += ctx.clip_row_offsets.data()[i];
      if (p.lambda_quant != 0.0) n += static_cast<float>(p.lambda_quant * (squant.uniform(i) - 0.5));
      if (p.fixed_pattern) n += p.fixed_pattern->data()[i];
      n += static_cast<float>(cols[static_cast<std::size_t>(c)]);
      out[i] = static_cast<float>(n);
    }
  }
  return FrameBuffer(w, h, std::move(out), Domain::residual);
}

std::vector<std::uint64_t> histogram(std::span<const float> values, int bins, double lo, double hi) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins), 0);
  const double scale = bins / (hi - lo);
  for (float v : values) {
    const double pos = (static_cast<double>(v) - lo) * scale;
    int b = pos < 0.0 ? 0 : static_cast<int>(pos);
    if (b >= bins) b = bins - 1;
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

}  // namespace nightnoise::reference
