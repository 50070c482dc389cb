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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "nightnoise/frames.hpp"
#include "nightnoise/noisegen.hpp"
#include "nightnoise/parallel.hpp"

namespace nightnoise {

// Full-resolution planes indexed by Channel (R, G, B, NIR).
using PlaneImage = std::array<Raster, 4>;

struct IspConfig {
  double gamma = 1.0 / 2.2;
  // Gray-world balance of the display channels; explicit gains otherwise.
  bool gray_world = true;
  std::array<double, 4> wb_gains = {1.0, 1.0, 1.0, 1.0};
  bool equalize = true;
  bool nir_in_display = false;
  // NIR synthesised by unprocess as a mixture of linear R, G, B.
  std::array<double, 3> nir_mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  // Throws std::invalid_argument on gamma <= 0 or non-positive gains.
  void validate() const;
};

// Bilinear interpolation of each channel's sites with edge replication.
// Throws FrameError on a residual-domain frame.
PlaneImage demosaic(const FrameBuffer& raw, const CfaLayout& layout);
PlaneImage demosaic(const FrameBuffer& raw);

// Gray-world: every display channel scaled to the mean of the display
// channel means. Result clipped to [0, 1]. Throws std::invalid_argument on a
// zero-mean display plane in gray-world mode.
PlaneImage white_balance(const PlaneImage& image, const IspConfig& config);
// Gains gray-world would apply (1 for channels outside the display).
std::array<double, 4> gray_world_gains(const PlaneImage& image, bool include_nir);

// Global equalisation over 256 levels: level l maps to the fraction of
// pixels at or below l.
Raster equalize(const Raster& plane);

FrameBuffer gamma_encode(const FrameBuffer& frame, double gamma);
Raster gamma_encode(const Raster& plane, double gamma);

// Display image: R, G, B (and NIR when config.nir_in_display).
std::vector<Raster> isp(const FrameBuffer& raw, const IspConfig& config);

// Display planes (R, G, B) to a RAW-like mosaic: inverse gamma, inverse
// explicit gains (unit under gray-world), NIR mixture, CFA sampling.
FrameBuffer unprocess(const std::array<Raster, 3>& display, const CfaLayout& layout, const IspConfig& config);

struct TrainingPair {
  Clip noisy_window;
  FrameBuffer clean_target;
  std::size_t window_center_index = 0;
};

inline constexpr std::size_t kPairWindow = 5;

// Synthesises the clip once, then emits every contiguous 5-frame window
// with the gamma-encoded clean centre frame as target.
// Throws std::invalid_argument on clips shorter than 5 frames.
std::vector<TrainingPair> make_training_pairs(const Clip& clean, const NoiseParams& params, std::uint64_t clip_id,
                                              double gamma = 1.0 / 2.2, Exec exec = Exec::parallel);

// Mean of (frame - fixed_pattern) over the clip, clipped to [0, 1].
// Throws std::invalid_argument on an empty clip, FrameError on geometry
// mismatch.
FrameBuffer reference_denoise(const Clip& noisy, const NoiseParams& params, Exec exec = Exec::parallel);

// Binary 8-bit P6 of three planes, P5 of one.
std::vector<std::uint8_t> encode_ppm(const Raster& r, const Raster& g, const Raster& b);
std::vector<std::uint8_t> encode_pgm8(const Raster& plane);
// Writes `stem`.ppm plus `stem`_nir.pgm when a fourth plane is present.
void write_display(const std::vector<Raster>& display, const std::filesystem::path& stem);

// pair_%06d/noisy_0..4.rfr and target.rfr under `dir`.
void write_training_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& dir);

}  // namespace nightnoise
