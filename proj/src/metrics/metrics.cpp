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

#include "nightnoise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>
#include <json.hpp>

#include "nightnoise/parallel.hpp"

namespace nightnoise {

using json = nlohmann::json;

void HistogramSpec::validate() const {
  if (bins < 2) throw std::invalid_argument("histogram needs at least two bins");
  if (!(lo < hi)) throw std::invalid_argument("histogram range must satisfy lo < hi");
  if (!(epsilon > 0.0)) throw std::invalid_argument("histogram smoothing epsilon must be positive");
}

std::vector<std::uint64_t> histogram_counts(std::span<const float> values, const HistogramSpec& spec) {
  spec.validate();
  const auto bins = static_cast<std::size_t>(spec.bins);
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t chunks = (values.size() + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> partial(chunks * bins, 0);
  const double scale = spec.bins / (spec.hi - spec.lo);
  parallel_for(static_cast<std::int64_t>(chunks), Exec::parallel, [&](std::int64_t k) {
    std::uint64_t* counts = &partial[static_cast<std::size_t>(k) * bins];
    const std::size_t end = std::min(values.size(), (static_cast<std::size_t>(k) + 1) * kChunk);
    for (std::size_t i = static_cast<std::size_t>(k) * kChunk; i < end; ++i) {
      const double pos = (static_cast<double>(values[i]) - spec.lo) * scale;
      std::size_t b = 0;
      if (pos >= static_cast<double>(bins)) {
        b = bins - 1;
      } else if (pos > 0.0) {
        b = static_cast<std::size_t>(pos);
      }
      ++counts[b];
    }
  });
  std::vector<std::uint64_t> out(bins, 0);
  for (std::size_t k = 0; k < chunks; ++k) {
    for (std::size_t b = 0; b < bins; ++b) out[b] += partial[k * bins + b];
  }
  return out;
}

std::vector<double> smoothed_histogram(std::span<const std::uint64_t> counts, const HistogramSpec& spec) {
  double n = 0.0;
  for (auto c : counts) n += static_cast<double>(c);
  if (n == 0.0) throw std::invalid_argument("histogram of an empty sample");
  const double norm = 1.0 + static_cast<double>(counts.size()) * spec.epsilon;
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = (static_cast<double>(counts[i]) / n + spec.epsilon) / norm;
  return p;
}

double kld_from_counts(std::span<const std::uint64_t> real, std::span<const std::uint64_t> synth,
                       const HistogramSpec& spec) {
  if (real.size() != synth.size()) throw std::invalid_argument("histograms differ in bin count");
  const auto p = smoothed_histogram(real, spec);
  const auto q = smoothed_histogram(synth, spec);
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += p[i] * std::log(p[i] / q[i]);
  return std::max(d, 0.0);
}

double kld(std::span<const float> real, std::span<const float> synth, const HistogramSpec& spec) {
  if (real.empty() || synth.empty()) throw std::invalid_argument("kld needs nonempty real and synthetic samples");
  return kld_from_counts(histogram_counts(real, spec), histogram_counts(synth, spec), spec);
}

double kld(const ResidualPatchSet& real, const ResidualPatchSet& synth, const HistogramSpec& spec) {
  return kld(real.values(), synth.values(), spec);
}

namespace {

void require_same_geometry(const FrameBuffer& a, const FrameBuffer& b) {
  if (!a.same_geometry(b)) {
    throw FrameError(FrameErrc::geometry_mismatch, "frames",
                     "metric inputs differ in geometry (" + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
  }
}

}  // namespace

double psnr(const FrameBuffer& a, const FrameBuffer& b, double peak) {
  require_same_geometry(a, b);
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    se += d * d;
  }
  if (se == 0.0) return kPsnrIdentical;
  return -10.0 * std::log10(se / static_cast<double>(a.size()) / (peak * peak));
}

double ssim(const FrameBuffer& a, const FrameBuffer& b, double peak) {
  require_same_geometry(a, b);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  const int w = a.width();
  const int h = a.height();
  if (w < kWin || h < kWin) throw std::invalid_argument("ssim needs frames of at least 11x11 pixels");
  std::array<double, kWin> g{};
  double gs = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gs += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= gs;

  const int ow = w - kWin + 1;
  const int oh = h - kWin + 1;
  // Horizontal pass for x, y, x^2, y^2, xy then vertical pass.
  const std::size_t hs = static_cast<std::size_t>(h) * ow;
  std::vector<double> hx(hs), hy(hs), hxx(hs), hyy(hs), hxy(hs);
  parallel_for(h, Exec::parallel, [&](std::int64_t r) {
    for (int c = 0; c < ow; ++c) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int k = 0; k < kWin; ++k) {
        const double x = a.at(static_cast<int>(r), c + k);
        const double y = b.at(static_cast<int>(r), c + k);
        const double gk = g[static_cast<std::size_t>(k)];
        sx += gk * x;
        sy += gk * y;
        sxx += gk * x * x;
        syy += gk * y * y;
        sxy += gk * x * y;
      }
      const auto i = static_cast<std::size_t>(r) * ow + c;
      hx[i] = sx;
      hy[i] = sy;
      hxx[i] = sxx;
      hyy[i] = syy;
      hxy[i] = sxy;
    }
  });
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  std::vector<double> row_sum(static_cast<std::size_t>(oh), 0.0);
  parallel_for(oh, Exec::parallel, [&](std::int64_t r) {
    double acc = 0.0;
    for (int c = 0; c < ow; ++c) {
      double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
      for (int k = 0; k < kWin; ++k) {
        const auto i = static_cast<std::size_t>(r + k) * ow + c;
        const double gk = g[static_cast<std::size_t>(k)];
        mx += gk * hx[i];
        my += gk * hy[i];
        exx += gk * hxx[i];
        eyy += gk * hyy[i];
        exy += gk * hxy[i];
      }
      const double vx = exx - mx * mx;
      const double vy = eyy - my * my;
      const double cxy = exy - mx * my;
      acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    row_sum[static_cast<std::size_t>(r)] = acc;
  });
  double total = 0.0;
  for (double v : row_sum) total += v;
  return total / (static_cast<double>(ow) * oh);
}

namespace {

std::vector<double> mean_row_spectrum(const ResidualPatchSet& set) {
  if (set.empty()) throw std::invalid_argument("spectral distance needs nonempty patch sets");
  const int p = set.patch_size();
  const int nb = p / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(p));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(nb));
  fftw_plan plan = fftw_plan_dft_r2c_1d(p, in, out, FFTW_ESTIMATE);
  std::vector<double> spec(static_cast<std::size_t>(nb), 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto patch = set.patch(i);
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c < p; ++c) in[c] = patch[static_cast<std::size_t>(r) * p + c];
      fftw_execute(plan);
      for (int k = 0; k < nb; ++k) spec[static_cast<std::size_t>(k)] += std::hypot(out[k][0], out[k][1]);
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);
  double mass = 0.0;
  for (double v : spec) mass += v;
  if (mass > 0.0) {
    for (auto& v : spec) v /= mass;
  }
  return spec;
}

}  // namespace

double spectral_distance(const ResidualPatchSet& real, const ResidualPatchSet& synth) {
  if (real.patch_size() != synth.patch_size()) throw std::invalid_argument("patch sizes differ");
  const auto a = mean_row_spectrum(real);
  const auto b = mean_row_spectrum(synth);
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
  return d;
}

std::vector<AblationVariant> default_ablation_ladder() {
  using C = NoiseComponent;
  ComponentSet s{C::read};
  std::vector<AblationVariant> v;
  v.push_back({"read", s});
  s = s.with(C::shot);
  v.push_back({"+shot", s});
  s = s.with(C::quant);
  v.push_back({"+quant", s});
  s = s.with(C::row).with(C::row_t);
  v.push_back({"+row,row_t", s});
  s = s.with(C::periodic);
  v.push_back({"+periodic", s});
  s = s.with(C::fixed);
  v.push_back({"+fixed", s});
  return v;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants, const NoiseParams& params,
                                      const ResidualPatchSet& real, const Clip& clean, const HistogramSpec& spec,
                                      const AblationOptions& options) {
  if (variants.empty()) throw std::invalid_argument("ablation needs at least one variant");
  std::set<std::string> names;
  for (const auto& v : variants) {
    if (!names.insert(v.name).second) throw std::invalid_argument("duplicate ablation variant name " + v.name);
  }
  spec.validate();
  const auto real_counts = histogram_counts(real.values(), spec);
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    const NoiseParams p = restrict_components(params, v.components);
    const Clip noisy = synthesize_clip(clean, p, options.clip_id);
    ResidualPatchSet synth(options.patch);
    for (std::size_t t = 0; t < clean.size(); ++t) {
      const PairedBurst b(clean[t], {noisy[t]});
      const auto part = extract_residuals(b, options.patch, options.stride);
      for (std::size_t i = 0; i < part.size(); ++i) synth.add(part.patch(i), part.source_intensity(i), part.origin(i));
    }
    rows.push_back({v.name, kld_from_counts(real_counts, histogram_counts(synth.values(), spec), spec)});
  }
  return rows;
}

std::string histogram_spec_json(const HistogramSpec& spec) {
  return json{{"bins", spec.bins}, {"lo", spec.lo}, {"hi", spec.hi}, {"epsilon", spec.epsilon}}.dump();
}

std::string metric_json(const std::string& name, double value, const HistogramSpec& spec) {
  json j{{"metric", name}, {"spec", json::parse(histogram_spec_json(spec))}};
  if (std::isfinite(value)) {
    j["value"] = value;
  } else {
    j["value"] = value > 0 ? "inf" : "-inf";
  }
  return j.dump(2);
}

std::string ablation_json(const std::vector<AblationRow>& rows, const HistogramSpec& spec) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({{"name", r.name}, {"kld", r.kld}});
  return json{{"metric", "kld_ablation"}, {"spec", json::parse(histogram_spec_json(spec))}, {"rows", arr}}.dump(2);
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "variant" << "  " << std::right << std::setw(10) << "KLD"
      << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::right << std::fixed
        << std::setprecision(6) << std::setw(10) << r.kld << "\n";
  }
  return out.str();
}

}  // namespace nightnoise
