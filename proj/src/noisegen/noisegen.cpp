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

#include "nightnoise/noisegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace nightnoise {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void require_nonneg(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
  }
}

FrameBuffer residual_frame(int width, int height, std::vector<float> data) {
  return FrameBuffer(width, height, std::move(data), Domain::residual);
}

// Per-column periodic offsets for one frame.
std::vector<double> periodic_columns(int width, const NoiseParams& params, const NoiseStream& stream) {
  std::vector<double> cols(static_cast<std::size_t>(width), 0.0);
  const NoiseStream s = stream.with(StreamComponent::periodic);
  for (std::size_t k = 0; k < 3; ++k) {
    if (params.lambda_f[k] == 0.0) continue;
    const double amp = params.lambda_f[k] * s.normal(2 * k);
    const double phase = 2.0 * std::numbers::pi * s.uniform(2 * k + 1);
    const double omega = 2.0 * std::numbers::pi * params.freqs[k];
    for (int c = 0; c < width; ++c) cols[static_cast<std::size_t>(c)] += amp * std::cos(omega * c + phase);
  }
  return cols;
}

std::vector<double> row_offsets(int height, double variance, const NoiseStream& stream) {
  std::vector<double> rows(static_cast<std::size_t>(height), 0.0);
  if (variance == 0.0) return rows;
  const double sigma = std::sqrt(variance);
  for (int r = 0; r < height; ++r) rows[static_cast<std::size_t>(r)] = sigma * stream.normal(static_cast<std::uint64_t>(r));
  return rows;
}

inline double shot_read_at(double x, const NoiseParams& p, const NoiseStream& s, std::uint64_t i) {
  const double var = p.lambda_read + p.lambda_shot * x;
  if (var <= 0.0) return 0.0;
  return std::sqrt(var) * s.normal(i);
}

inline double quant_at(double interval, const NoiseStream& s, std::uint64_t i) {
  return interval * (s.uniform(i) - 0.5);
}

}  // namespace

// --- NoiseParams ------------------------------------------------------------

void NoiseParams::validate() const {
  require_nonneg(lambda_read, "lambda_read");
  require_nonneg(lambda_shot, "lambda_shot");
  require_nonneg(lambda_row, "lambda_row");
  require_nonneg(lambda_row_t, "lambda_row_t");
  require_nonneg(lambda_quant, "lambda_quant");
  for (double f : lambda_f) require_nonneg(f, "lambda_f");
  for (double f : freqs) {
    if (!(f > 0.0 && f <= 0.5)) throw std::invalid_argument("freqs must lie in (0, 0.5]");
  }
  if (fixed_pattern && fixed_pattern->domain() != Domain::residual) {
    throw std::invalid_argument("fixed_pattern must be a residual-domain frame");
  }
}

double NoiseParams::pixel_variance(double x) const {
  double v = lambda_read + lambda_shot * x + lambda_row + lambda_row_t +
             lambda_quant * lambda_quant / 12.0;
  for (double f : lambda_f) v += 0.5 * f * f;
  return v;
}

std::string_view component_name(NoiseComponent c) {
  switch (c) {
    case NoiseComponent::shot: return "shot";
    case NoiseComponent::read: return "read";
    case NoiseComponent::quant: return "quant";
    case NoiseComponent::row: return "row";
    case NoiseComponent::row_t: return "row_t";
    case NoiseComponent::periodic: return "periodic";
    case NoiseComponent::fixed: return "fixed";
  }
  return "?";
}

std::optional<NoiseComponent> parse_component(std::string_view name) {
  for (auto c : kAllComponents) {
    if (component_name(c) == name) return c;
  }
  return std::nullopt;
}

NoiseParams restrict_components(const NoiseParams& p, ComponentSet enabled) {
  NoiseParams out = p;
  if (!enabled.contains(NoiseComponent::read)) out.lambda_read = 0.0;
  if (!enabled.contains(NoiseComponent::shot)) out.lambda_shot = 0.0;
  if (!enabled.contains(NoiseComponent::quant)) out.lambda_quant = 0.0;
  if (!enabled.contains(NoiseComponent::row)) out.lambda_row = 0.0;
  if (!enabled.contains(NoiseComponent::row_t)) out.lambda_row_t = 0.0;
  if (!enabled.contains(NoiseComponent::periodic)) out.lambda_f = {0.0, 0.0, 0.0};
  if (!enabled.contains(NoiseComponent::fixed)) out.fixed_pattern.reset();
  return out;
}

// --- params file ------------------------------------------------------------

namespace {

json params_json(const NoiseParams& p, const std::optional<std::string>& pattern_ref) {
  json j;
  j["lambda_read"] = p.lambda_read;
  j["lambda_shot"] = p.lambda_shot;
  j["lambda_row"] = p.lambda_row;
  j["lambda_row_t"] = p.lambda_row_t;
  j["lambda_quant"] = p.lambda_quant;
  j["lambda_f1"] = p.lambda_f[0];
  j["lambda_f2"] = p.lambda_f[1];
  j["lambda_f3"] = p.lambda_f[2];
  j["fixed_pattern"] = pattern_ref ? json(*pattern_ref) : json(nullptr);
  j["seed"] = p.seed;
  j["freqs"] = p.freqs;
  return j;
}

double get_lambda(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("params file missing ") + key);
  if (!j.at(key).is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

}  // namespace

std::string params_to_json(const NoiseParams& params, const std::optional<std::string>& pattern_ref) {
  return params_json(params, pattern_ref).dump(2);
}

NoiseParams read_params(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FrameError(FrameErrc::io_failure, path.string(), "cannot open params file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("params file " + path.string() + ": " + e.what());
  }
  NoiseParams p;
  p.lambda_read = get_lambda(j, "lambda_read");
  p.lambda_shot = get_lambda(j, "lambda_shot");
  p.lambda_row = get_lambda(j, "lambda_row");
  p.lambda_row_t = get_lambda(j, "lambda_row_t");
  p.lambda_quant = get_lambda(j, "lambda_quant");
  p.lambda_f = {get_lambda(j, "lambda_f1"), get_lambda(j, "lambda_f2"), get_lambda(j, "lambda_f3")};
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)) {
      throw std::invalid_argument("seed must be an unsigned 64-bit integer");
    }
    p.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("freqs") && !j["freqs"].is_null()) {
    const auto& f = j["freqs"];
    if (!f.is_array() || f.size() != 3) throw std::invalid_argument("freqs must be an array of 3 numbers");
    for (std::size_t k = 0; k < 3; ++k) p.freqs[k] = f[k].get<double>();
  }
  if (j.contains("fixed_pattern") && !j["fixed_pattern"].is_null()) {
    const fs::path rel = j["fixed_pattern"].get<std::string>();
    p.fixed_pattern = read_frame(rel.is_absolute() ? rel : path.parent_path() / rel);
  }
  p.validate();
  return p;
}

void write_params(const NoiseParams& params, const fs::path& path, const std::string& pattern_name) {
  std::optional<std::string> ref;
  if (params.fixed_pattern) {
    write_frame(*params.fixed_pattern, path.parent_path() / pattern_name);
    ref = pattern_name;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FrameError(FrameErrc::io_failure, path.string(), "cannot write " + path.string());
  out << params_json(params, ref).dump(2) << "\n";
}

// --- samplers ---------------------------------------------------------------

FrameBuffer sample_shot_read(const FrameBuffer& clean, const NoiseParams& params,
                             const NoiseStream& stream, Exec exec) {
  std::vector<float> out(clean.size(), 0.0f);
  if (params.lambda_read != 0.0 || params.lambda_shot != 0.0) {
    const NoiseStream s = stream.with(StreamComponent::shot_read);
    const auto src = clean.data();
    parallel_for(static_cast<std::int64_t>(out.size()), exec, [&](std::int64_t i) {
      const auto u = static_cast<std::size_t>(i);
      out[u] = static_cast<float>(shot_read_at(src[u], params, s, u));
    });
  }
  return residual_frame(clean.width(), clean.height(), std::move(out));
}

FrameBuffer sample_row(int height, int width, double variance, const NoiseStream& stream, Exec exec) {
  if (!(variance >= 0.0)) throw std::invalid_argument("row variance must be >= 0");
  const auto rows = row_offsets(height, variance, stream);
  std::vector<float> out(static_cast<std::size_t>(height) * width);
  parallel_for(height, exec, [&](std::int64_t r) {
    std::fill_n(out.begin() + r * width, width, static_cast<float>(rows[static_cast<std::size_t>(r)]));
  });
  return residual_frame(width, height, std::move(out));
}

FrameBuffer sample_periodic(int height, int width, const NoiseParams& params, const NoiseStream& stream,
                            Exec exec) {
  const auto cols = periodic_columns(width, params, stream);
  std::vector<float> out(static_cast<std::size_t>(height) * width);
  parallel_for(height, exec, [&](std::int64_t r) {
    for (int c = 0; c < width; ++c) out[static_cast<std::size_t>(r * width + c)] = static_cast<float>(cols[static_cast<std::size_t>(c)]);
  });
  return residual_frame(width, height, std::move(out));
}

FrameBuffer sample_quant(int height, int width, double interval, const NoiseStream& stream, Exec exec) {
  if (!(interval >= 0.0)) throw std::invalid_argument("quantization interval must be >= 0");
  std::vector<float> out(static_cast<std::size_t>(height) * width, 0.0f);
  if (interval != 0.0) {
    const NoiseStream s = stream.with(StreamComponent::quant);
    parallel_for(static_cast<std::int64_t>(out.size()), exec, [&](std::int64_t i) {
      out[static_cast<std::size_t>(i)] = static_cast<float>(quant_at(interval, s, static_cast<std::uint64_t>(i)));
    });
  }
  return residual_frame(width, height, std::move(out));
}

FrameBuffer clip_row_offsets(int height, int width, const NoiseParams& params, std::uint64_t clip_id,
                             Exec exec) {
  const NoiseStream s{params.seed, clip_id, kClipLevelFrame, StreamComponent::row_t};
  return sample_row(height, width, params.lambda_row_t, s, exec);
}

namespace {

// Fused kernel shared by synthesize_residual / synthesize_frame. Computes, per
// pixel, the same element formulas as the individual samplers.
template <typename Store>
void compose(const FrameBuffer& clean, const NoiseParams& params, const ClipContext& ctx, Exec exec,
             Store&& store) {
  const int w = clean.width();
  const int h = clean.height();
  if (params.fixed_pattern && !params.fixed_pattern->same_geometry(clean)) {
    throw FrameError(FrameErrc::geometry_mismatch, "fixed_pattern",
                     "fixed pattern " + std::to_string(params.fixed_pattern->width()) + "x" +
                         std::to_string(params.fixed_pattern->height()) + " does not match frame " +
                         std::to_string(w) + "x" + std::to_string(h));
  }
  const bool has_clip_rows = ctx.clip_row_offsets.size() != 0;
  if (has_clip_rows && !ctx.clip_row_offsets.same_geometry(clean)) {
    throw FrameError(FrameErrc::geometry_mismatch, "clip_row_offsets",
                     "clip row offsets do not match the frame geometry");
  }
  const NoiseStream base{params.seed, ctx.clip_id, ctx.frame_id, StreamComponent::shot_read};
  const NoiseStream sr = base.with(StreamComponent::shot_read);
  const NoiseStream qs = base.with(StreamComponent::quant);
  const auto rows = row_offsets(h, params.lambda_row, base.with(StreamComponent::row));
  const auto cols = periodic_columns(w, params, base);
  const bool do_sr = params.lambda_read != 0.0 || params.lambda_shot != 0.0;
  const bool do_q = params.lambda_quant != 0.0;
  const auto x = clean.data();
  const std::span<const float> fixed =
      params.fixed_pattern ? params.fixed_pattern->data() : std::span<const float>();
  const std::span<const float> crow = has_clip_rows ? ctx.clip_row_offsets.data() : std::span<const float>();

  parallel_for(h, exec, [&](std::int64_t r) {
    for (int c = 0; c < w; ++c) {
      const auto i = static_cast<std::size_t>(r * w + c);
      double n = 0.0;
      if (do_sr) n += static_cast<float>(shot_read_at(x[i], params, sr, i));
      n += static_cast<float>(rows[static_cast<std::size_t>(r)]);
      if (has_clip_rows) n += crow[i];
      if (do_q) n += static_cast<float>(quant_at(params.lambda_quant, qs, i));
      if (!fixed.empty()) n += fixed[i];
      n += static_cast<float>(cols[static_cast<std::size_t>(c)]);
      store(i, static_cast<double>(x[i]), n);
    }
  });
}

}  // namespace

FrameBuffer synthesize_residual(const FrameBuffer& clean, const NoiseParams& params,
                                const ClipContext& ctx, Exec exec) {
  std::vector<float> out(clean.size());
  compose(clean, params, ctx, exec, [&](std::size_t i, double, double n) { out[i] = static_cast<float>(n); });
  return residual_frame(clean.width(), clean.height(), std::move(out));
}

FrameBuffer synthesize_frame(const FrameBuffer& clean, const NoiseParams& params, const ClipContext& ctx,
                             Exec exec) {
  if (clean.domain() != Domain::clipped) {
    throw std::invalid_argument("synthesize_frame expects a clipped-domain clean frame");
  }
  std::vector<float> out(clean.size());
  compose(clean, params, ctx, exec, [&](std::size_t i, double x, double n) {
    out[i] = static_cast<float>(std::clamp(x + n, 0.0, 1.0));
  });
  return FrameBuffer(clean.width(), clean.height(), std::move(out), Domain::clipped, clean.cfa());
}

Clip synthesize_clip(const Clip& clean, const NoiseParams& params, std::uint64_t clip_id, Exec exec) {
  ClipContext ctx;
  ctx.clip_id = clip_id;
  ctx.clip_row_offsets = clip_row_offsets(clean.height(), clean.width(), params, clip_id, exec);
  std::vector<FrameBuffer> frames;
  frames.reserve(clean.size());
  for (std::size_t t = 0; t < clean.size(); ++t) {
    ctx.frame_id = t;
    frames.push_back(synthesize_frame(clean[t], params, ctx, exec));
  }
  return Clip(std::move(frames), clean.frame_rate);
}

}  // namespace nightnoise
