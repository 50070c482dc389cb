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

#include "nightnoise/patches.hpp"

#include <stdexcept>
#include <string>

namespace nightnoise {

void ResidualPatchSet::add(std::span<const float> pixels, double intensity, PatchOrigin origin) {
  if (pixels.size() != pixels_per_patch()) {
    throw std::invalid_argument("patch has " + std::to_string(pixels.size()) + " pixels, expected " +
                                std::to_string(pixels_per_patch()));
  }
  values_.insert(values_.end(), pixels.begin(), pixels.end());
  intensity_.push_back(intensity);
  origins_.push_back(origin);
}

void ResidualPatchSet::reserve(std::size_t patches) {
  values_.reserve(patches * pixels_per_patch());
  intensity_.reserve(patches);
  origins_.reserve(patches);
}

namespace {

void append_burst(ResidualPatchSet& set, const PairedBurst& burst, std::uint32_t burst_index, int patch,
                  int stride) {
  const FrameBuffer& clean = burst.clean();
  if (patch <= 0 || stride <= 0) throw std::invalid_argument("patch and stride must be positive");
  if (patch > clean.width() || patch > clean.height()) {
    throw std::invalid_argument("patch " + std::to_string(patch) + " larger than frame " +
                                std::to_string(clean.width()) + "x" + std::to_string(clean.height()));
  }
  const int tiles_y = (clean.height() - patch) / stride + 1;
  const int tiles_x = (clean.width() - patch) / stride + 1;
  set.reserve(set.size() + burst.noisy().size() * static_cast<std::size_t>(tiles_x * tiles_y));

  // Mean clean intensity per tile is shared by every frame of the burst.
  std::vector<double> tile_mean(static_cast<std::size_t>(tiles_x * tiles_y));
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      double s = 0.0;
      for (int r = 0; r < patch; ++r) {
        for (int c = 0; c < patch; ++c) s += clean.at(ty * stride + r, tx * stride + c);
      }
      tile_mean[static_cast<std::size_t>(ty * tiles_x + tx)] = s / (static_cast<double>(patch) * patch);
    }
  }

  std::vector<float> buf(static_cast<std::size_t>(patch) * patch);
  for (std::size_t k = 0; k < burst.clip_count(); ++k) {
    const auto [begin, end] = burst.clip_range(k);
    for (std::size_t f = begin; f < end; ++f) {
      const FrameBuffer& noisy = burst.noisy()[f];
      for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
          const int r0 = ty * stride;
          const int c0 = tx * stride;
          for (int r = 0; r < patch; ++r) {
            const auto nrow = noisy.row(r0 + r);
            const auto crow = clean.row(r0 + r);
            for (int c = 0; c < patch; ++c) {
              buf[static_cast<std::size_t>(r * patch + c)] = nrow[static_cast<std::size_t>(c0 + c)] - crow[static_cast<std::size_t>(c0 + c)];
            }
          }
          set.add(buf, tile_mean[static_cast<std::size_t>(ty * tiles_x + tx)],
                  PatchOrigin{burst_index, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(f), r0, c0});
        }
      }
    }
  }
}

}  // namespace

ResidualPatchSet extract_residuals(const PairedBurst& burst, int patch, int stride) {
  return extract_residuals(std::span<const PairedBurst>(&burst, 1), patch, stride);
}

ResidualPatchSet extract_residuals(std::span<const PairedBurst> bursts, int patch, int stride) {
  ResidualPatchSet set(patch);
  for (std::size_t b = 0; b < bursts.size(); ++b) {
    set.add_clean_frame(bursts[b].clean());
    append_burst(set, bursts[b], static_cast<std::uint32_t>(b), patch, stride);
  }
  return set;
}

std::vector<PairedBurst> synthesize_bursts(std::span<const PairedBurst> layout, const NoiseParams& params,
                                           std::uint64_t first_clip_id, Exec exec) {
  std::vector<PairedBurst> out;
  out.reserve(layout.size());
  std::uint64_t clip_id = first_clip_id;
  for (const auto& burst : layout) {
    std::vector<FrameBuffer> noisy;
    noisy.reserve(burst.noisy().size());
    for (std::size_t k = 0; k < burst.clip_count(); ++k) {
      const Clip clean(std::vector<FrameBuffer>(burst.clip_sizes()[k], burst.clean()));
      Clip synth = synthesize_clip(clean, params, clip_id++, exec);
      for (auto& f : synth.frames) noisy.push_back(std::move(f));
    }
    out.emplace_back(burst.clean(), std::move(noisy), burst.clip_sizes());
  }
  return out;
}

}  // namespace nightnoise
