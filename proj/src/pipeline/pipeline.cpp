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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace nightnoise {

namespace fs = std::filesystem;

void IspConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be positive");
  for (double g : wb_gains) {
    if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("white-balance gains must be positive");
  }
  for (double m : nir_mix) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("NIR mixture weights must be non-negative");
  }
}

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void require_same_size(const Raster& a, const Raster& b) {
  if (a.width != b.width || a.height != b.height) {
    throw FrameError(FrameErrc::geometry_mismatch, "planes", "display planes differ in size");
  }
}

// Linear interpolation weights along one axis of a half-resolution plane
// whose samples sit at full-resolution positions offset + 2 i.
struct AxisTap {
  int i0 = 0;
  int i1 = 0;
  float t = 0.0f;
};

std::vector<AxisTap> axis_taps(int full, int offset) {
  const int n = full / 2;
  std::vector<AxisTap> taps(static_cast<std::size_t>(full));
  for (int x = 0; x < full; ++x) {
    const double u = (x - offset) / 2.0;
    const int lo = static_cast<int>(std::floor(u));
    AxisTap& t = taps[static_cast<std::size_t>(x)];
    t.i0 = std::clamp(lo, 0, n - 1);
    t.i1 = std::clamp(lo + 1, 0, n - 1);
    t.t = static_cast<float>(u - lo);
    if (t.i0 == t.i1) t.t = 0.0f;  // outside the sample grid: replicate the edge
  }
  return taps;
}

}  // namespace

PlaneImage demosaic(const FrameBuffer& raw) { return demosaic(raw, raw.cfa()); }

PlaneImage demosaic(const FrameBuffer& raw, const CfaLayout& layout) {
  if (raw.domain() != Domain::clipped) {
    throw FrameError(FrameErrc::domain_violation, "domain", "demosaic needs a clipped-domain frame");
  }
  const int w = raw.width();
  const int h = raw.height();
  PlaneImage out;
  for (Channel ch : kAllChannels) {
    const Raster plane = channel_plane(raw, layout, ch);
    const auto [sr, sc] = layout.site(ch);
    const auto rows = axis_taps(h, sr);
    const auto cols = axis_taps(w, sc);
    Raster full(w, h);
    parallel_for(h, Exec::parallel, [&](std::int64_t r64) {
      const int r = static_cast<int>(r64);
      const AxisTap& tr = rows[static_cast<std::size_t>(r)];
      for (int c = 0; c < w; ++c) {
        const AxisTap& tc = cols[static_cast<std::size_t>(c)];
        const float a = plane.at(tr.i0, tc.i0) + tc.t * (plane.at(tr.i0, tc.i1) - plane.at(tr.i0, tc.i0));
        const float b = plane.at(tr.i1, tc.i0) + tc.t * (plane.at(tr.i1, tc.i1) - plane.at(tr.i1, tc.i0));
        full.at(r, c) = a + tr.t * (b - a);
      }
    });
    out[static_cast<std::size_t>(ch)] = std::move(full);
  }
  return out;
}

std::array<double, 4> gray_world_gains(const PlaneImage& image, bool include_nir) {
  const std::size_t n_display = include_nir ? 4 : 3;
  std::array<double, 4> means{};
  double overall = 0.0;
  for (std::size_t k = 0; k < n_display; ++k) {
    double s = 0.0;
    for (float v : image[k].data) s += v;
    means[k] = image[k].data.empty() ? 0.0 : s / static_cast<double>(image[k].data.size());
    if (!(means[k] > 0.0)) {
      throw std::invalid_argument("gray-world white balance: " + std::string(channel_name(static_cast<Channel>(k))) +
                                  " plane has zero mean");
    }
    overall += means[k];
  }
  overall /= static_cast<double>(n_display);
  std::array<double, 4> gains = {1.0, 1.0, 1.0, 1.0};
  for (std::size_t k = 0; k < n_display; ++k) gains[k] = overall / means[k];
  return gains;
}

PlaneImage white_balance(const PlaneImage& image, const IspConfig& config) {
  config.validate();
  const auto gains = config.gray_world ? gray_world_gains(image, config.nir_in_display) : config.wb_gains;
  PlaneImage out = image;
  for (std::size_t k = 0; k < 4; ++k) {
    for (auto& v : out[k].data) v = clamp01(v * gains[k]);
  }
  return out;
}

Raster equalize(const Raster& plane) {
  constexpr int kLevels = 256;
  auto level = [](float v) { return std::clamp(static_cast<int>(std::floor(static_cast<double>(v) * kLevels)), 0, kLevels - 1); };
  std::array<std::uint64_t, kLevels> hist{};
  for (float v : plane.data) ++hist[static_cast<std::size_t>(level(v))];
  std::array<float, kLevels> map{};
  std::uint64_t acc = 0;
  const double n = static_cast<double>(std::max<std::size_t>(plane.data.size(), 1));
  for (int l = 0; l < kLevels; ++l) {
    acc += hist[static_cast<std::size_t>(l)];
    map[static_cast<std::size_t>(l)] = static_cast<float>(static_cast<double>(acc) / n);
  }
  Raster out = plane;
  for (auto& v : out.data) v = map[static_cast<std::size_t>(level(v))];
  return out;
}

Raster gamma_encode(const Raster& plane, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  Raster out = plane;
  for (auto& v : out.data) v = static_cast<float>(std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), gamma));
  return out;
}

FrameBuffer gamma_encode(const FrameBuffer& frame, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (frame.domain() != Domain::clipped) {
    throw FrameError(FrameErrc::domain_violation, "domain", "gamma encoding needs a clipped-domain frame");
  }
  std::vector<float> out(frame.data().begin(), frame.data().end());
  parallel_for(static_cast<std::int64_t>(out.size()), Exec::parallel, [&](std::int64_t i) {
    auto& v = out[static_cast<std::size_t>(i)];
    v = static_cast<float>(std::pow(static_cast<double>(v), gamma));
  });
  return FrameBuffer(frame.width(), frame.height(), std::move(out), Domain::clipped, frame.cfa());
}

std::vector<Raster> isp(const FrameBuffer& raw, const IspConfig& config) {
  config.validate();
  PlaneImage planes = white_balance(demosaic(raw), config);
  const std::size_t n_display = config.nir_in_display ? 4 : 3;
  std::vector<Raster> out;
  for (std::size_t k = 0; k < n_display; ++k) {
    Raster p = gamma_encode(planes[k], config.gamma);
    if (config.equalize) p = equalize(p);
    out.push_back(std::move(p));
  }
  return out;
}

FrameBuffer unprocess(const std::array<Raster, 3>& display, const CfaLayout& layout, const IspConfig& config) {
  config.validate();
  require_same_size(display[0], display[1]);
  require_same_size(display[0], display[2]);
  const int w = display[0].width;
  const int h = display[0].height;
  const double inv_gamma = 1.0 / config.gamma;
  const std::array<double, 4> gains = config.gray_world ? std::array<double, 4>{1.0, 1.0, 1.0, 1.0} : config.wb_gains;
  std::vector<float> out(static_cast<std::size_t>(w) * h);
  parallel_for(h, Exec::parallel, [&](std::int64_t r64) {
    const int r = static_cast<int>(r64);
    for (int c = 0; c < w; ++c) {
      std::array<double, 4> lin{};
      for (std::size_t k = 0; k < 3; ++k) {
        lin[k] = std::pow(std::clamp(static_cast<double>(display[k].at(r, c)), 0.0, 1.0), inv_gamma);
      }
      lin[3] = config.nir_mix[0] * lin[0] + config.nir_mix[1] * lin[1] + config.nir_mix[2] * lin[2];
      const auto ch = static_cast<std::size_t>(layout.at(r, c));
      out[static_cast<std::size_t>(r) * w + c] = clamp01(lin[ch] / gains[ch]);
    }
  });
  return FrameBuffer(w, h, std::move(out), Domain::clipped, layout);
}

std::vector<TrainingPair> make_training_pairs(const Clip& clean, const NoiseParams& params, std::uint64_t clip_id,
                                              double gamma, Exec exec) {
  if (clean.size() < kPairWindow) {
    throw std::invalid_argument("training pairs need a clip of at least 5 frames, got " + std::to_string(clean.size()));
  }
  const Clip noisy = synthesize_clip(clean, params, clip_id, exec);
  std::vector<TrainingPair> pairs;
  for (std::size_t start = 0; start + kPairWindow <= clean.size(); ++start) {
    TrainingPair p;
    std::vector<FrameBuffer> window(noisy.frames.begin() + static_cast<std::ptrdiff_t>(start),
                                    noisy.frames.begin() + static_cast<std::ptrdiff_t>(start + kPairWindow));
    p.noisy_window = Clip(std::move(window), noisy.frame_rate);
    p.window_center_index = start + kPairWindow / 2;
    p.clean_target = gamma_encode(clean[p.window_center_index], gamma);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

FrameBuffer reference_denoise(const Clip& noisy, const NoiseParams& params, Exec exec) {
  if (noisy.size() == 0) throw std::invalid_argument("reference_denoise needs a nonempty clip");
  const FrameBuffer& first = noisy[0];
  for (const auto& f : noisy.frames) {
    if (!f.same_geometry(first)) throw FrameError(FrameErrc::geometry_mismatch, "clip", "clip frames differ in size");
  }
  if (params.fixed_pattern && !params.fixed_pattern->same_geometry(first)) {
    throw FrameError(FrameErrc::geometry_mismatch, "fixed_pattern", "fixed pattern does not match the clip geometry");
  }
  const std::size_t n = first.size();
  const double inv = 1.0 / static_cast<double>(noisy.size());
  std::vector<float> out(n);
  parallel_for(static_cast<std::int64_t>(n), exec, [&](std::int64_t i64) {
    const auto i = static_cast<std::size_t>(i64);
    double s = 0.0;
    for (const auto& f : noisy.frames) s += f.data()[i];
    double v = s * inv;
    if (params.fixed_pattern) v -= params.fixed_pattern->data()[i];
    out[i] = clamp01(v);
  });
  return FrameBuffer(first.width(), first.height(), std::move(out), Domain::clipped, first.cfa());
}

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> header(const char* magic, int w, int h) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FrameError(FrameErrc::io_failure, path.string(), "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FrameError(FrameErrc::io_failure, path.string(), "short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Raster& r, const Raster& g, const Raster& b) {
  require_same_size(r, g);
  require_same_size(r, b);
  auto out = header("P6", r.width, r.height);
  out.reserve(out.size() + r.data.size() * 3);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    out.push_back(to_byte(r.data[i]));
    out.push_back(to_byte(g.data[i]));
    out.push_back(to_byte(b.data[i]));
  }
  return out;
}

std::vector<std::uint8_t> encode_pgm8(const Raster& plane) {
  auto out = header("P5", plane.width, plane.height);
  for (float v : plane.data) out.push_back(to_byte(v));
  return out;
}

void write_display(const std::vector<Raster>& display, const fs::path& stem) {
  if (display.size() < 3) throw std::invalid_argument("display export needs at least three planes");
  write_bytes(encode_ppm(display[0], display[1], display[2]), fs::path(stem.string() + ".ppm"));
  if (display.size() > 3) write_bytes(encode_pgm8(display[3]), fs::path(stem.string() + "_nir.pgm"));
}

void write_training_pairs(const std::vector<TrainingPair>& pairs, const fs::path& dir) {
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "pair_%06zu", k);
    const fs::path pd = dir / name;
    std::error_code ec;
    fs::create_directories(pd, ec);
    if (ec) throw FrameError(FrameErrc::io_failure, pd.string(), "cannot create " + pd.string());
    for (std::size_t i = 0; i < pairs[k].noisy_window.size(); ++i) {
      write_frame(pairs[k].noisy_window[i], pd / ("noisy_" + std::to_string(i) + ".rfr"));
    }
    write_frame(pairs[k].clean_target, pd / "target.rfr");
  }
}

}  // namespace nightnoise
