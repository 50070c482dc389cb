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
#include <stdexcept>

#include "json.hpp"
#include "nightnoise/metrics.hpp"
#include "nightnoise/patches.hpp"

namespace nightnoise {

using json = nlohmann::json;

void CalibrationConfig::validate() const {
  if (bit_depth < 1 || bit_depth > 32) throw std::invalid_argument("bit_depth must be in [1, 32]");
  if (patch < 2 || stride < 1) throw std::invalid_argument("patch must be >= 2 and stride >= 1");
  if (fourier_bins < 1 || hist_bins < 1) throw std::invalid_argument("feature bin counts must be positive");
  for (double f : freqs) {
    if (!(f >= 0.0 && f <= 0.5)) throw std::invalid_argument("periodic frequencies must lie in [0, 0.5]");
  }
}

namespace {

// Banding from single frames: spread of row means across rows, less the
// pixel-noise floor. Per-frame and clip-constant parts are indistinguishable.
double pooled_row_variance(std::span<const PairedBurst> bursts, const ShotReadEstimate& noise) {
  double sum = 0.0, dof = 0.0;
  for (const auto& burst : bursts) {
    const FrameBuffer& clean = burst.clean();
    const int w = clean.width();
    const int h = clean.height();
    std::vector<double> floor(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r) {
      double xs = 0.0;
      for (float v : clean.row(r)) xs += v;
      floor[static_cast<std::size_t>(r)] = noise.pixel_variance(xs / w) / w;
    }
    for (const auto& noisy : burst.noisy()) {
      std::vector<double> m(static_cast<std::size_t>(h), 0.0);
      double mean = 0.0, fl = 0.0;
      for (int r = 0; r < h; ++r) {
        const auto nr = noisy.row(r);
        const auto cr = clean.row(r);
        double s = 0.0;
        for (int c = 0; c < w; ++c) s += static_cast<double>(nr[static_cast<std::size_t>(c)]) - cr[static_cast<std::size_t>(c)];
        m[static_cast<std::size_t>(r)] = s / w;
        mean += s / w;
        fl += floor[static_cast<std::size_t>(r)];
      }
      mean /= h;
      fl /= h;
      double ss = 0.0;
      for (double v : m) ss += (v - mean) * (v - mean);
      sum += ss - (h - 1) * fl;
      dof += h - 1;
    }
  }
  return dof > 0.0 ? std::max(sum / dof, 0.0) : 0.0;
}

json params_scalars(const NoiseParams& p) {
  return json::parse(params_to_json(p));
}

}  // namespace

CalibrationReport calibrate(std::span<const PairedBurst> bursts, const CalibrationConfig& config) {
  config.validate();
  if (bursts.empty()) throw EstimationError(EstimationErrc::empty_input, "calibration needs at least one burst");
  CalibrationReport rep;

  rep.shot_read = estimate_shot_read(bursts);
  for (const auto& w : rep.shot_read.warnings) rep.warnings.push_back("shot/read: " + w);

  try {
    rep.row = estimate_row(bursts, rep.shot_read);
  } catch (const EstimationError& e) {
    if (e.code() != EstimationErrc::single_frame_clips) throw;
    rep.row = RowEstimate{};
    rep.row.row = pooled_row_variance(bursts, rep.shot_read);
    rep.row.row_t = 0.0;
    rep.row.row_t_identifiable = false;
    rep.row.warnings.push_back("lambda_row_t not identifiable from single-frame clips; set to 0");
  }
  for (const auto& w : rep.row.warnings) rep.warnings.push_back("row: " + w);

  rep.periodic = estimate_periodic(bursts, config.freqs, rep.shot_read);
  for (const auto& w : rep.periodic.warnings) rep.warnings.push_back("periodic: " + w);

  NoiseParams p;
  p.seed = config.seed;
  p.freqs = config.freqs;
  p.lambda_shot = rep.shot_read.shot;
  p.lambda_row = rep.row.row;
  p.lambda_row_t = rep.row.row_t;
  p.lambda_f = rep.periodic.lambda_f;
  if (config.prefer_kurtosis && rep.shot_read.quant_identified) {
    p.lambda_quant = rep.shot_read.quant;
    p.lambda_read = rep.shot_read.read;
  } else {
    p.lambda_quant = std::ldexp(1.0, -config.bit_depth);
    p.lambda_read = std::max(rep.shot_read.intercept - p.lambda_quant * p.lambda_quant / 12.0, 0.0);
  }

  std::size_t total_frames = 0;
  for (const auto& b : bursts) total_frames += b.noisy().size();
  if (total_frames >= 2) {
    FrameBuffer pattern = estimate_fixed_pattern(bursts);
    if (config.remove_pattern_row_means) pattern = remove_row_means(pattern);
    p.fixed_pattern = std::move(pattern);
  } else {
    rep.warnings.push_back("fixed pattern needs at least two frames; omitted");
  }
  rep.moment_params = p;

  const ResidualPatchSet real = extract_residuals(bursts, config.patch, config.stride);
  const HistogramSpec hist;
  const auto kld_of = [&](const NoiseParams& q) { return kld(real.values(), synthesize_like(q, real, config.seed ^ 0x6b6c64u), hist); };

  double s2 = 0.0;
  for (float v : real.values()) s2 += static_cast<double>(v) * v;
  const bool silent = s2 / static_cast<double>(real.values().size()) < 1e-14;

  rep.params = p;
  if (!config.refine) {
    // keep the moment estimates
  } else if (silent) {
    rep.warnings.push_back("real residuals carry no variance; refinement skipped");
    rep.params.lambda_quant = 0.0;
  } else {
    CriticState critic = config.critic;
    const FeatureMap features = make_feature_map(real, config.fourier_bins, config.hist_bins);
    NoiseParams init = p;
    init.seed = config.seed;
    RefineResult r = refine_params(init, real, critic, features);
    for (const auto& w : r.warnings) rep.warnings.push_back("refine: " + w);
    rep.params = r.params;
    rep.params.seed = config.seed;
    rep.refinement = std::move(r);
  }
  rep.kld_moment = kld_of(rep.moment_params);
  rep.kld_final = kld_of(rep.params);
  return rep;
}

std::string calibration_report_json(const CalibrationReport& rep, const std::optional<std::string>& pattern_ref) {
  json j;
  json stages;
  stages["shot_read"] = {{"lambda_read", rep.shot_read.read},
                         {"lambda_shot", rep.shot_read.shot},
                         {"intercept", rep.shot_read.intercept},
                         {"lambda_quant", rep.shot_read.quant},
                         {"quant_identified", rep.shot_read.quant_identified},
                         {"fourth_cumulant", rep.shot_read.fourth_cumulant},
                         {"fourth_cumulant_stderr", rep.shot_read.fourth_cumulant_stderr}};
  stages["row"] = {{"lambda_row", rep.row.row},
                   {"lambda_row_t", rep.row.row_t},
                   {"lambda_row_t_identifiable", rep.row.row_t_identifiable}};
  if (!rep.row.row_t_identifiable) stages["row"]["lambda_row_t"] = "not identifiable";
  stages["periodic"] = {{"lambda_f1", rep.periodic.lambda_f[0]},
                        {"lambda_f2", rep.periodic.lambda_f[1]},
                        {"lambda_f3", rep.periodic.lambda_f[2]}};
  stages["moments"] = params_scalars(rep.moment_params);
  j["stages"] = stages;

  json trace = json::array();
  if (rep.refinement) {
    for (const auto& t : rep.refinement->trace) {
      trace.push_back({{"step", t.step},
                       {"loss", t.loss},
                       {"critic_gap", t.critic_gap},
                       {"penalty", t.penalty},
                       {"kld", t.kld},
                       {"params", params_scalars(t.params)}});
    }
    j["refinement"] = {{"steps_run", rep.refinement->steps_run},
                       {"diverged", rep.refinement->diverged},
                       {"critic_weights", rep.refinement->critic.weights}};
  } else {
    j["refinement"] = nullptr;
  }
  j["trace"] = trace;
  j["kld_moment"] = rep.kld_moment;
  j["kld_final"] = rep.kld_final;
  j["warnings"] = rep.warnings;
  j["params"] = json::parse(params_to_json(rep.params, pattern_ref));
  return j.dump(2);
}

}  // namespace nightnoise
