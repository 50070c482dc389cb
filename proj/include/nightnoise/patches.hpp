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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nightnoise/frames.hpp"
#include "nightnoise/noisegen.hpp"

namespace nightnoise {

// Where a residual patch was cut from.
struct PatchOrigin {
  std::uint32_t burst = 0;
  std::uint32_t clip = 0;
  std::uint32_t frame = 0;  // index into the burst's noisy list
  int row = 0;
  int col = 0;
};

// Square residual patches (noisy - clean) plus the clean frames they were cut
// from, so a generator can synthesise a matching patch for every entry.
class ResidualPatchSet {
 public:
  explicit ResidualPatchSet(int patch_size = 64) : patch_size_(patch_size) {}

  int patch_size() const { return patch_size_; }
  std::size_t pixels_per_patch() const { return static_cast<std::size_t>(patch_size_) * patch_size_; }
  std::size_t size() const { return origins_.size(); }
  bool empty() const { return origins_.empty(); }

  std::span<const float> patch(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * pixels_per_patch(), pixels_per_patch());
  }
  // Every residual value of every patch, patch-major.
  std::span<const float> values() const { return values_; }
  double source_intensity(std::size_t i) const { return intensity_[i]; }
  const PatchOrigin& origin(std::size_t i) const { return origins_[i]; }

  const std::vector<FrameBuffer>& clean_frames() const { return cleans_; }
  const FrameBuffer& clean_for(std::size_t i) const { return cleans_[origins_[i].burst]; }

  void add_clean_frame(FrameBuffer clean) { cleans_.push_back(std::move(clean)); }
  void add(std::span<const float> pixels, double intensity, PatchOrigin origin);
  void reserve(std::size_t patches);

 private:
  int patch_size_;
  std::vector<float> values_;
  std::vector<double> intensity_;
  std::vector<PatchOrigin> origins_;
  std::vector<FrameBuffer> cleans_;
};

// Tiles noisy - clean of every noisy frame into patch x patch squares at the
// given stride. Throws std::invalid_argument when the patch exceeds the frame.
ResidualPatchSet extract_residuals(const PairedBurst& burst, int patch, int stride);
ResidualPatchSet extract_residuals(std::span<const PairedBurst> bursts, int patch, int stride);

// Synthetic twin of a dataset: same clean frames and clip partition, noisy
// frames drawn from `params`. Clip ids are assigned consecutively from
// `first_clip_id` across bursts.
std::vector<PairedBurst> synthesize_bursts(std::span<const PairedBurst> layout, const NoiseParams& params,
                                           std::uint64_t first_clip_id = 0, Exec exec = Exec::parallel);

}  // namespace nightnoise
