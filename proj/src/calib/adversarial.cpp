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

#include "nightnoise/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nightnoise/metrics.hpp"
#include "nightnoise/parallel.hpp"

namespace nightnoise {

void CriticState::validate(std::size_t feature_dim) const {
  if (!weights.empty() && weights.size() != feature_dim) {
    throw std::invalid_argument("critic has " + std::to_string(weights.size()) + " weights but the feature map has " +
                                std::to_string(feature_dim) + " features");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("critic weights must be finite");
  }
  if (!(gp_coeff >= 0.0) || !std::isfinite(gp_coeff)) throw std::invalid_argument("gp_coeff must be >= 0");
  if (!(critic_lr > 0.0) || !(gen_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (steps < 0 || critic_ratio < 1 || batch < 1 || gp_batch < 0 || trace_every < 1) {
    throw std::invalid_argument("critic step counts must be positive");
  }
}

PatchBatch make_batch(const FeatureMap& features, std::vector<double> pixels, std::size_t count) {
  const std::size_t n = features.pixels();
  if (pixels.size() != count * n) throw std::invalid_argument("batch pixel count mismatch");
  PatchBatch b;
  b.patch_size = features.patch_size();
  b.count = count;
  b.pixels = std::move(pixels);
  const std::size_t d = features.dim();
  b.features.resize(count * d);
  parallel_for(static_cast<std::int64_t>(count), Exec::parallel, [&](std::int64_t i) {
    const auto v = features.evaluate(b.patch(static_cast<std::size_t>(i)));
    std::copy(v.begin(), v.end(), b.features.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * d));
  });
  return b;
}

PatchBatch gather_batch(const FeatureMap& features, const ResidualPatchSet& set, std::span<const std::size_t> indices) {
  if (set.patch_size() != features.patch_size()) throw std::invalid_argument("patch size differs from feature map");
  std::vector<double> px;
  px.reserve(indices.size() * features.pixels());
  for (std::size_t i : indices) {
    const auto p = set.patch(i);
    px.insert(px.end(), p.begin(), p.end());
  }
  return make_batch(features, std::move(px), indices.size());
}

WganLoss wgan_gp_loss(const PatchBatch& real, const PatchBatch& synth, const CriticState& critic,
                      const FeatureMap& features, std::span<const double> interp) {
  const std::size_t d = features.dim();
  critic.validate(d);
  if (real.count != synth.count || real.count == 0) {
    throw std::invalid_argument("real and synthetic batches must be nonempty and equal in size");
  }
  if (real.patch_size != features.patch_size() || synth.patch_size != features.patch_size()) {
    throw std::invalid_argument("batch patch size differs from the feature map");
  }
  if (interp.size() > real.count) throw std::invalid_argument("more interpolation draws than pairs");
  std::vector<double> w = critic.weights;
  if (w.empty()) w.assign(d, 0.0);

  WganLoss out;
  out.critic_grad.assign(d, 0.0);
  const double inv_b = 1.0 / static_cast<double>(real.count);
  double ds = 0.0, dr = 0.0;
  for (std::size_t b = 0; b < real.count; ++b) {
    const auto fs = synth.feature(b, d);
    const auto fr = real.feature(b, d);
    for (std::size_t j = 0; j < d; ++j) {
      ds += w[j] * fs[j];
      dr += w[j] * fr[j];
      out.critic_grad[j] += (fs[j] - fr[j]) * inv_b;
    }
  }
  out.critic_gap = (ds - dr) * inv_b;

  const std::size_t g_count = interp.size();
  if (critic.gp_coeff > 0.0 && g_count > 0) {
    const std::size_t n = features.pixels();
    std::vector<double> pen(g_count, 0.0);
    std::vector<std::vector<double>> pen_grad(g_count, std::vector<double>(d, 0.0));
    parallel_for(static_cast<std::int64_t>(g_count), Exec::parallel, [&](std::int64_t gi) {
      const auto k = static_cast<std::size_t>(gi);
      const double t = interp[k];
      const auto xr = real.patch(k);
      const auto xs = synth.patch(k);
      std::vector<double> xh(n);
      for (std::size_t i = 0; i < n; ++i) xh[i] = t * xr[i] + (1.0 - t) * xs[i];
      const PatchFeatures f = features.forward(xh);
      std::vector<double> g(n);
      f.vjp(w, g);
      double norm2 = 0.0;
      for (double v : g) norm2 += v * v;
      const double norm = std::sqrt(norm2);
      pen[k] = (norm - 1.0) * (norm - 1.0);
      if (norm > 0.0) {
        // d|J^T w|/dw = J g / |g|
        std::vector<double> jg(d);
        f.jvp(g, jg);
        for (std::size_t j = 0; j < d; ++j) pen_grad[k][j] = 2.0 * (norm - 1.0) * jg[j] / norm;
      }
    });
    const double inv_g = 1.0 / static_cast<double>(g_count);
    for (std::size_t k = 0; k < g_count; ++k) {
      out.penalty += critic.gp_coeff * pen[k] * inv_g;
      for (std::size_t j = 0; j < d; ++j) out.critic_grad[j] += critic.gp_coeff * pen_grad[k][j] * inv_g;
    }
  } else if (critic.gp_coeff > 0.0) {
    throw std::invalid_argument("gradient penalty needs at least one interpolation draw");
  }
  out.loss = out.critic_gap + out.penalty;
  out.feature_grad.resize(d);
  for (std::size_t j = 0; j < d; ++j) out.feature_grad[j] = w[j] * inv_b;
  return out;
}

// --- generator ----------------------------------------------------------------

GenVector to_std_units(const NoiseParams& p) {
  return {std::sqrt(p.lambda_read), std::sqrt(p.lambda_shot), std::sqrt(p.lambda_row), std::sqrt(p.lambda_row_t),
          p.lambda_quant, p.lambda_f[0], p.lambda_f[1], p.lambda_f[2]};
}

void apply_std_units(const GenVector& v, NoiseParams& p) {
  p.lambda_read = v[0] * v[0];
  p.lambda_shot = v[1] * v[1];
  p.lambda_row = v[2] * v[2];
  p.lambda_row_t = v[3] * v[3];
  p.lambda_quant = v[4];
  p.lambda_f = {v[5], v[6], v[7]};
}

std::string_view gen_param_name(std::size_t i) {
  static constexpr std::array<std::string_view, kGenParams> kNames = {
      "lambda_read", "lambda_shot", "lambda_row", "lambda_row_t", "lambda_quant", "lambda_f1", "lambda_f2", "lambda_f3"};
  return kNames.at(i);
}

PatchGenerator::PatchGenerator(int patch_size, std::array<double, 3> freqs) : patch_(patch_size), freqs_(freqs) {
  if (patch_size < 2) throw std::invalid_argument("generator patch size must be >= 2");
}

PatchDraw PatchGenerator::draw(const NoiseStream& s) const {
  const std::size_t n = pixels();
  PatchDraw d;
  d.z.resize(n);
  d.u.resize(n);
  d.row.resize(static_cast<std::size_t>(patch_));
  d.row_t.resize(static_cast<std::size_t>(patch_));
  const NoiseStream sz = s.with(StreamComponent::shot_read);
  const NoiseStream sq = s.with(StreamComponent::quant);
  const NoiseStream sr = s.with(StreamComponent::row);
  const NoiseStream st = s.with(StreamComponent::row_t);
  const NoiseStream sp = s.with(StreamComponent::periodic);
  for (std::size_t i = 0; i < n; ++i) {
    d.z[i] = sz.normal(i);
    d.u[i] = sq.uniform(i);
  }
  for (std::size_t r = 0; r < d.row.size(); ++r) {
    d.row[r] = sr.normal(r);
    d.row_t[r] = st.normal(r);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    d.amp[k] = sp.normal(2 * k);
    d.phase[k] = 2.0 * std::numbers::pi * sp.uniform(2 * k + 1);
  }
  return d;
}

void PatchGenerator::render(const GenVector& p, const GeneratorSample& sample, std::span<double> out,
                            std::span<double> jac) const {
  const std::size_t n = pixels();
  if (sample.clean.size() != n || out.size() != n || (!sample.fixed.empty() && sample.fixed.size() != n)) {
    throw std::invalid_argument("generator sample does not match the patch size");
  }
  const bool want_jac = !jac.empty();
  if (want_jac && jac.size() != kGenParams * n) throw std::invalid_argument("generator jacobian has the wrong size");
  const PatchDraw& d = sample.draw;

  std::vector<double> cols(static_cast<std::size_t>(patch_), 0.0);
  std::array<std::vector<double>, 3> basis;
  for (std::size_t k = 0; k < 3; ++k) {
    basis[k].resize(static_cast<std::size_t>(patch_));
    for (int c = 0; c < patch_; ++c) {
      basis[k][static_cast<std::size_t>(c)] = d.amp[k] * std::cos(2.0 * std::numbers::pi * freqs_[k] * c + d.phase[k]);
      cols[static_cast<std::size_t>(c)] += p[5 + k] * basis[k][static_cast<std::size_t>(c)];
    }
  }
  const double a2 = p[0] * p[0];
  const double b2 = p[1] * p[1];
  for (int r = 0; r < patch_; ++r) {
    const double band = p[2] * d.row[static_cast<std::size_t>(r)] + p[3] * d.row_t[static_cast<std::size_t>(r)];
    for (int c = 0; c < patch_; ++c) {
      const auto i = static_cast<std::size_t>(r) * patch_ + c;
      const double x = sample.clean[i];
      const double sigma = std::sqrt(std::max(a2 + b2 * x, 0.0));
      const double q = d.u[i] - 0.5;
      double v = x + sigma * d.z[i] + band + p[4] * q + cols[static_cast<std::size_t>(c)];
      if (!sample.fixed.empty()) v += sample.fixed[i];
      const bool inside = v > 0.0 && v < 1.0;
      out[i] = std::clamp(v, 0.0, 1.0) - x;
      if (!want_jac) continue;
      if (!inside) {
        for (std::size_t k = 0; k < kGenParams; ++k) jac[k * n + i] = 0.0;
        continue;
      }
      jac[0 * n + i] = sigma > 0.0 ? p[0] * d.z[i] / sigma : 0.0;
      jac[1 * n + i] = sigma > 0.0 ? p[1] * x * d.z[i] / sigma : 0.0;
      jac[2 * n + i] = d.row[static_cast<std::size_t>(r)];
      jac[3 * n + i] = d.row_t[static_cast<std::size_t>(r)];
      jac[4 * n + i] = q;
      for (std::size_t k = 0; k < 3; ++k) jac[(5 + k) * n + i] = basis[k][static_cast<std::size_t>(c)];
    }
  }
}

namespace {

std::vector<double> crop(const FrameBuffer& f, int r0, int c0, int p) {
  std::vector<double> out(static_cast<std::size_t>(p) * p);
  for (int r = 0; r < p; ++r) {
    const auto row = f.row(r0 + r);
    for (int c = 0; c < p; ++c) out[static_cast<std::size_t>(r) * p + c] = row[static_cast<std::size_t>(c0 + c)];
  }
  return out;
}

GenVector lambda_gradient(const GenVector& p, const GenVector& g) {
  GenVector out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = p[i] > 0.0 ? g[i] / (2.0 * p[i]) : 0.0;
  for (std::size_t i = 4; i < kGenParams; ++i) out[i] = g[i];
  return out;
}

}  // namespace

std::vector<GeneratorSample> draw_generator_batch(const ResidualPatchSet& real, const NoiseParams& params,
                                                  const PatchGenerator& gen, std::uint64_t clip, std::uint64_t step,
                                                  std::size_t count) {
  if (real.empty()) throw std::invalid_argument("cannot draw generator samples from an empty patch set");
  const int p = gen.patch_size();
  const NoiseStream select{params.seed, clip, step, StreamComponent::selection};
  std::vector<GeneratorSample> out(count);
  parallel_for(static_cast<std::int64_t>(count), Exec::parallel, [&](std::int64_t bi) {
    const auto b = static_cast<std::size_t>(bi);
    const auto idx = std::min(real.size() - 1, static_cast<std::size_t>(select.uniform(b) * static_cast<double>(real.size())));
    const PatchOrigin& o = real.origin(idx);
    GeneratorSample& s = out[b];
    s.clean = crop(real.clean_for(idx), o.row, o.col, p);
    if (params.fixed_pattern) s.fixed = crop(*params.fixed_pattern, o.row, o.col, p);
    s.draw = gen.draw(NoiseStream{params.seed, clip, step * count + b, StreamComponent::shot_read});
  });
  return out;
}

GeneratorObjective generator_objective(const NoiseParams& params, const std::vector<GeneratorSample>& batch,
                                       const PatchGenerator& gen, const CriticState& critic,
                                       const FeatureMap& features) {
  const std::size_t d = features.dim();
  critic.validate(d);
  if (batch.empty()) throw std::invalid_argument("generator objective needs a nonempty batch");
  std::vector<double> w = critic.weights;
  if (w.empty()) w.assign(d, 0.0);
  const GenVector p = to_std_units(params);
  const std::size_t n = gen.pixels();

  std::vector<double> values(batch.size(), 0.0);
  std::vector<GenVector> grads(batch.size());
  parallel_for(static_cast<std::int64_t>(batch.size()), Exec::parallel, [&](std::int64_t bi) {
    const auto b = static_cast<std::size_t>(bi);
    std::vector<double> y(n), jac(kGenParams * n), g(n);
    gen.render(p, batch[b], y, jac);
    const PatchFeatures f = features.forward(y);
    double dval = 0.0;
    for (std::size_t j = 0; j < d; ++j) dval += w[j] * f.values()[j];
    values[b] = dval;
    f.vjp(w, g);
    GenVector acc{};
    for (std::size_t k = 0; k < kGenParams; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += g[i] * jac[k * n + i];
      acc[k] = s;
    }
    grads[b] = acc;
  });

  GeneratorObjective out;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.value -= values[b] * inv_b;
    for (std::size_t k = 0; k < kGenParams; ++k) out.grad_std[k] -= grads[b][k] * inv_b;
  }
  out.grad_lambda = lambda_gradient(p, out.grad_std);
  return out;
}

FeatureMap make_feature_map(const ResidualPatchSet& real, int fourier_bins, int hist_bins) {
  if (real.empty()) throw std::invalid_argument("feature map needs a nonempty patch set");
  double s = 0.0, s2 = 0.0;
  for (float v : real.values()) {
    s += v;
    s2 += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(real.values().size());
  const double var = std::max(s2 / n - (s / n) * (s / n), 0.0);
  return FeatureMap(real.patch_size(), std::sqrt(var), fourier_bins, hist_bins);
}

std::vector<float> synthesize_like(const NoiseParams& params, const ResidualPatchSet& real, std::uint64_t seed) {
  const PatchGenerator gen(real.patch_size(), params.freqs);
  const GenVector p = to_std_units(params);
  const std::size_t n = gen.pixels();
  std::vector<float> out(real.size() * n);
  NoiseParams keyed = params;
  keyed.seed = seed;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < real.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, real.size() - start);
    parallel_for(static_cast<std::int64_t>(count), Exec::parallel, [&](std::int64_t bi) {
      const std::size_t idx = start + static_cast<std::size_t>(bi);
      const PatchOrigin& o = real.origin(idx);
      GeneratorSample s;
      s.clean = crop(real.clean_for(idx), o.row, o.col, gen.patch_size());
      if (params.fixed_pattern) s.fixed = crop(*params.fixed_pattern, o.row, o.col, gen.patch_size());
      s.draw = gen.draw(NoiseStream{seed, kRefineEvalClip, idx, StreamComponent::shot_read});
      std::vector<double> y(n);
      gen.render(p, s, y);
      for (std::size_t i = 0; i < n; ++i) out[idx * n + i] = static_cast<float>(y[i]);
    });
  }
  return out;
}

// --- refinement ---------------------------------------------------------------

namespace {

struct Adam {
  std::vector<double> m, v;
  double beta1 = 0.5, beta2 = 0.9, eps = 1e-12;
  int t = 0;

  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& x, const std::vector<double>& g, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

// Optimisation variables: each scales one or more std-unit parameters.
struct ParamGroups {
  std::vector<std::vector<std::size_t>> members;
  GenVector ref{};

  GenVector expand(const std::vector<double>& v) const {
    GenVector p{};
    for (std::size_t g = 0; g < members.size(); ++g) {
      for (std::size_t i : members[g]) p[i] = v[g] * ref[i];
    }
    return p;
  }
  std::vector<double> reduce(const GenVector& grad) const {
    std::vector<double> out(members.size(), 0.0);
    for (std::size_t g = 0; g < members.size(); ++g) {
      for (std::size_t i : members[g]) out[g] += grad[i] * ref[i];
    }
    return out;
  }
};

bool all_finite(const GenVector& p) {
  return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

// Finite in lambda space as well (the variance terms are squared).
bool finite_lambdas(const GenVector& p) {
  if (!all_finite(p)) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isfinite(p[i] * p[i])) return false;
  }
  return true;
}

}  // namespace

RefineResult refine_params(const NoiseParams& init, const ResidualPatchSet& real, const CriticState& cfg,
                           const FeatureMap& features_in) {
  init.validate();
  if (real.empty()) throw std::invalid_argument("refinement needs a nonempty real patch set");
  if (real.patch_size() != features_in.patch_size()) throw std::invalid_argument("patch size differs from feature map");

  FeatureMap features = features_in;
  const std::size_t d = features.dim();
  cfg.validate(d);
  const std::size_t nreal = real.size();

  if (!features.standardized()) {
    std::vector<double> raw(nreal * d);
    FeatureMap plain = features;
    plain.clear_standardization();
    parallel_for(static_cast<std::int64_t>(nreal), Exec::parallel, [&](std::int64_t i) {
      const auto v = plain.evaluate(real.patch(static_cast<std::size_t>(i)));
      std::copy(v.begin(), v.end(), raw.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * d));
    });
    features.standardize_from(raw, nreal);
  }

  RefineResult res;
  res.params = init;
  res.critic = cfg;
  if (res.critic.weights.empty()) res.critic.weights.assign(d, 0.0);

  const HistogramSpec hist;
  const auto real_counts = histogram_counts(real.values(), hist);
  const PatchGenerator gen(real.patch_size(), init.freqs);
  const auto batch = static_cast<std::size_t>(cfg.batch);
  const std::size_t gp_pairs = std::min<std::size_t>(static_cast<std::size_t>(cfg.gp_batch), batch);

  // Floor for the learning-rate reference of parameters that start at 0.
  const double floor = 0.02 * features.residual_sigma();
  const GenVector p0 = to_std_units(init);
  ParamGroups groups;
  std::vector<double> var;
  auto add_group = [&](std::vector<std::size_t> idx) {
    double norm = 0.0;
    for (std::size_t i : idx) norm = std::max(norm, p0[i]);
    if (idx.size() > 1 && norm > floor) {
      for (std::size_t i : idx) groups.ref[i] = p0[i];
      var.push_back(1.0);
    } else {
      const double ref = std::max(norm, floor);
      for (std::size_t i : idx) groups.ref[i] = ref;
      var.push_back(norm / ref);
    }
    groups.members.push_back(std::move(idx));
  };
  if (cfg.tie_unidentifiable) {
    add_group({0, 1});
    add_group({2, 3});
  } else {
    for (std::size_t i = 0; i < 4; ++i) add_group({i});
  }
  for (std::size_t i = 4; i < kGenParams; ++i) add_group({i});

  Adam critic_opt(d);
  Adam gen_opt(var.size());
  GenVector p = groups.expand(var);
  GenVector last_good = p;

  auto params_from = [&](const GenVector& v) {
    NoiseParams out = init;
    apply_std_units(v, out);
    return out;
  };

  for (int step = 0; step < cfg.steps; ++step) {
    const double decay = 1.0 - static_cast<double>(step) / static_cast<double>(cfg.steps);
    NoiseParams cur = params_from(p);

    // Critic: one synthetic batch per generator step, fresh real minibatch
    // and interpolation draws per critic update.
    const auto synth_samples = draw_generator_batch(real, cur, gen, kRefineCriticClip, static_cast<std::uint64_t>(step), batch);
    std::vector<double> synth_px(batch * gen.pixels());
    parallel_for(static_cast<std::int64_t>(batch), Exec::parallel, [&](std::int64_t b) {
      gen.render(p, synth_samples[static_cast<std::size_t>(b)],
                 std::span<double>(synth_px).subspan(static_cast<std::size_t>(b) * gen.pixels(), gen.pixels()));
    });
    const PatchBatch synth = make_batch(features, std::move(synth_px), batch);

    WganLoss loss;
    for (int k = 0; k < cfg.critic_ratio; ++k) {
      const std::uint64_t draw_id = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(cfg.critic_ratio) + static_cast<std::uint64_t>(k);
      const NoiseStream sel{init.seed, kRefineCriticClip, draw_id, StreamComponent::selection};
      const NoiseStream itp{init.seed, kRefineCriticClip, draw_id, StreamComponent::interpolation};
      std::vector<std::size_t> idx(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        idx[b] = std::min(nreal - 1, static_cast<std::size_t>(sel.uniform(b) * static_cast<double>(nreal)));
      }
      const PatchBatch real_batch = gather_batch(features, real, idx);
      std::vector<double> t(gp_pairs);
      for (std::size_t b = 0; b < gp_pairs; ++b) t[b] = itp.uniform(b);
      loss = wgan_gp_loss(real_batch, synth, res.critic, features, t);
      if (!std::isfinite(loss.loss)) break;
      critic_opt.step(res.critic.weights, loss.critic_grad, cfg.critic_lr * decay);
    }
    if (!std::isfinite(loss.loss) ||
        !std::all_of(res.critic.weights.begin(), res.critic.weights.end(), [](double w) { return std::isfinite(w); })) {
      res.diverged = true;
      res.warnings.push_back("non-finite critic loss at step " + std::to_string(step) + "; keeping the last finite iterate");
      break;
    }

    // Generator: fresh batch, reparameterised gradient of -E[D(synth)].
    const auto gen_samples = draw_generator_batch(real, cur, gen, kRefineGeneratorClip, static_cast<std::uint64_t>(step), batch);
    const GeneratorObjective obj = generator_objective(cur, gen_samples, gen, res.critic, features);
    if (!std::isfinite(obj.value) || !all_finite(obj.grad_std)) {
      res.diverged = true;
      res.warnings.push_back("non-finite generator objective at step " + std::to_string(step) +
                             "; keeping the last finite iterate");
      break;
    }
    gen_opt.step(var, groups.reduce(obj.grad_std), cfg.gen_lr * decay);
    for (auto& v : var) v = std::max(v, 0.0);
    const GenVector next = groups.expand(var);
    if (!finite_lambdas(next)) {
      res.diverged = true;
      res.warnings.push_back("non-finite parameters at step " + std::to_string(step) + "; keeping the last finite iterate");
      break;
    }
    p = next;
    last_good = p;
    res.steps_run = step + 1;

    if ((step + 1) % cfg.trace_every == 0 || step + 1 == cfg.steps) {
      TracePoint tp;
      tp.step = step + 1;
      tp.loss = loss.loss;
      tp.critic_gap = loss.critic_gap;
      tp.penalty = loss.penalty;
      std::vector<float> vals(synth.pixels.begin(), synth.pixels.end());
      tp.kld = kld_from_counts(real_counts, histogram_counts(vals, hist), hist);
      tp.params = params_from(p);
      tp.params.fixed_pattern.reset();
      res.trace.push_back(std::move(tp));
    }
  }
  res.params = params_from(last_good);
  return res;
}

}  // namespace nightnoise
