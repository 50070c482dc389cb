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

#include "nightnoise/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nightnoise/parallel.hpp"

namespace nightnoise {

namespace {

constexpr int kBuckets = 64;
constexpr double kMarginSigmas = 4.0;
constexpr std::size_t kMinBucketCount = 64;

void require_bursts(std::span<const PairedBurst> bursts) {
  if (bursts.empty()) throw EstimationError(EstimationErrc::empty_input, "no bursts supplied");
}

std::vector<double> residual_of(const FrameBuffer& noisy, const FrameBuffer& clean) {
  std::vector<double> r(noisy.size());
  const auto n = noisy.data();
  const auto c = clean.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<double>(n[i]) - static_cast<double>(c[i]);
  return r;
}

// Pixel-wise mean residual of one clip; zeros for single-frame clips so that
// deviations reduce to raw residuals.
std::vector<double> clip_temporal_mean(const PairedBurst& burst, std::size_t begin, std::size_t end) {
  const FrameBuffer& clean = burst.clean();
  std::vector<double> mean(clean.size(), 0.0);
  if (end - begin < 2) return mean;
  for (std::size_t f = begin; f < end; ++f) {
    const auto n = burst.noisy()[f].data();
    const auto c = clean.data();
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += static_cast<double>(n[i]) - static_cast<double>(c[i]);
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  for (double& m : mean) m *= inv;
  return mean;
}

// Double centring mixes each pixel's variance with its row and column: for
// independent d with variances a + b x, E[e^2] = a f + b z where f is the
// spatial attenuation and z the matching weighted sum of x. Returns z / f,
// the abscissa that keeps the fit unbiased on textured scenes.
std::vector<double> centred_intensity(const FrameBuffer& clean) {
  const int w = clean.width();
  const int h = clean.height();
  const auto x = clean.data();
  std::vector<double> rs(static_cast<std::size_t>(h), 0.0), cs(static_cast<std::size_t>(w), 0.0);
  double total = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = x[static_cast<std::size_t>(r) * w + c];
      rs[static_cast<std::size_t>(r)] += v;
      cs[static_cast<std::size_t>(c)] += v;
      total += v;
    }
  }
  const double hw = static_cast<double>(h), ww = static_cast<double>(w);
  const double f = (1.0 - 1.0 / hw) * (1.0 - 1.0 / ww);
  std::vector<double> z(clean.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto i = static_cast<std::size_t>(r) * w + c;
      z[i] = ((1.0 - 2.0 / hw) * (1.0 - 2.0 / ww) * x[i] + (1.0 - 2.0 / hw) * rs[static_cast<std::size_t>(r)] / (ww * ww) +
              (1.0 - 2.0 / ww) * cs[static_cast<std::size_t>(c)] / (hw * hw) + total / (hw * hw * ww * ww)) /
             f;
    }
  }
  return z;
}

// Fourth-cumulant attenuation of centring against the mean of m samples.
double k4_factor(double m) { return std::pow(1.0 - 1.0 / m, 4) + (m - 1.0) / std::pow(m, 4); }

struct Bucket {
  double n = 0.0;
  double sx = 0.0;
  double s2 = 0.0;
  double s4 = 0.0;
  // Sum over pixels of f2^2 / f4 (centring correction of the fourth cumulant).
  double k4_ratio = 0.0;
};

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
};

// Weighted least squares var = a + b x over buckets with positive weight.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] <= 0.0) continue;
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  if (sw <= 0.0) throw EstimationError(EstimationErrc::insufficient_diversity, "no usable intensity buckets");
  const double mx = sx / sw;
  const double my = sy / sw;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] <= 0.0) continue;
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (sxx / sw < 1e-8) {
    throw EstimationError(EstimationErrc::insufficient_diversity,
                          "clean intensities span fewer than two distinct levels; shot/read fit is singular");
  }
  const double b = sxy / sxx;
  return {my - b * mx, b};
}

}  // namespace

ShotReadEstimate estimate_shot_read(std::span<const PairedBurst> bursts) {
  require_bursts(bursts);
  std::vector<Bucket> buckets(kBuckets);

  for (const auto& burst : bursts) {
    const FrameBuffer& clean = burst.clean();
    const int w = clean.width();
    const int h = clean.height();
    const auto x = clean.data();
    const auto x_eff = centred_intensity(clean);
    for (std::size_t k = 0; k < burst.clip_count(); ++k) {
      const auto [begin, end] = burst.clip_range(k);
      const double n = static_cast<double>(end - begin);
      const auto mean = clip_temporal_mean(burst, begin, end);
      const double f2 = (n >= 2 ? 1.0 - 1.0 / n : 1.0) * (1.0 - 1.0 / w) * (1.0 - 1.0 / h);
      const double f4 = (n >= 2 ? k4_factor(n) : 1.0) * k4_factor(w) * k4_factor(h);
      const double ratio = f2 * f2 / f4;
      const double inv_sqrt_f2 = 1.0 / std::sqrt(f2);

      const auto frames = static_cast<std::int64_t>(end - begin);
      std::vector<std::vector<Bucket>> partial(static_cast<std::size_t>(frames), std::vector<Bucket>(kBuckets));
      parallel_for(frames, Exec::parallel, [&](std::int64_t t) {
        auto d = residual_of(burst.noisy()[begin + static_cast<std::size_t>(t)], clean);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= mean[i];
        // Double centring removes per-row banding and per-column periodic terms.
        std::vector<double> rm(static_cast<std::size_t>(h), 0.0), cm(static_cast<std::size_t>(w), 0.0);
        double g = 0.0;
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            const double v = d[static_cast<std::size_t>(r) * w + c];
            rm[static_cast<std::size_t>(r)] += v;
            cm[static_cast<std::size_t>(c)] += v;
          }
        }
        for (double& v : rm) { g += v; v /= w; }
        for (double& v : cm) v /= h;
        g /= static_cast<double>(w) * h;
        auto& acc = partial[static_cast<std::size_t>(t)];
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            const auto i = static_cast<std::size_t>(r) * w + c;
            const double e = (d[i] - rm[static_cast<std::size_t>(r)] - cm[static_cast<std::size_t>(c)] + g) * inv_sqrt_f2;
            const int b = std::min(kBuckets - 1, static_cast<int>(x[i] * kBuckets));
            Bucket& bk = acc[static_cast<std::size_t>(b)];
            const double e2 = e * e;
            bk.n += 1.0;
            bk.sx += x_eff[i];
            bk.s2 += e2;
            bk.s4 += e2 * e2;
            bk.k4_ratio += ratio;
          }
        }
      });
      for (const auto& part : partial) {
        for (int b = 0; b < kBuckets; ++b) {
          buckets[static_cast<std::size_t>(b)].n += part[static_cast<std::size_t>(b)].n;
          buckets[static_cast<std::size_t>(b)].sx += part[static_cast<std::size_t>(b)].sx;
          buckets[static_cast<std::size_t>(b)].s2 += part[static_cast<std::size_t>(b)].s2;
          buckets[static_cast<std::size_t>(b)].s4 += part[static_cast<std::size_t>(b)].s4;
          buckets[static_cast<std::size_t>(b)].k4_ratio += part[static_cast<std::size_t>(b)].k4_ratio;
        }
      }
    }
  }

  std::vector<double> bx(kBuckets), bv(kBuckets), w(kBuckets, 0.0);
  for (int b = 0; b < kBuckets; ++b) {
    const Bucket& bk = buckets[static_cast<std::size_t>(b)];
    if (bk.n < kMinBucketCount) continue;
    bx[static_cast<std::size_t>(b)] = bk.sx / bk.n;
    bv[static_cast<std::size_t>(b)] = bk.s2 / bk.n;
    w[static_cast<std::size_t>(b)] = bk.n;
  }
  LinearFit fit = fit_line(bx, bv, w);

  // Drop buckets whose noise reaches the clip bounds, then refit with
  // inverse-variance weights.
  ShotReadEstimate est;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> w2(kBuckets, 0.0);
    for (int b = 0; b < kBuckets; ++b) {
      const auto u = static_cast<std::size_t>(b);
      if (w[u] <= 0.0) continue;
      const double var = std::max(fit.intercept + fit.slope * bx[u], 0.0);
      const double sigma = std::sqrt(var);
      if (bx[u] - kMarginSigmas * sigma < 0.0 || bx[u] + kMarginSigmas * sigma > 1.0) continue;
      w2[u] = var > 1e-14 ? w[u] / (var * var) : w[u];
    }
    try {
      fit = fit_line(bx, bv, w2);
    } catch (const EstimationError&) {
      est.warnings.push_back("all buckets lie within the clip margin; using the unmasked fit");
      break;
    }
    w = std::move(w2);
    for (auto& v : w) v = v > 0.0 ? 1.0 : 0.0;
    for (int b = 0; b < kBuckets; ++b) {
      if (w[static_cast<std::size_t>(b)] > 0.0) w[static_cast<std::size_t>(b)] = buckets[static_cast<std::size_t>(b)].n;
    }
  }

  // Fourth cumulant, pooled over the buckets kept by the fit.
  double n_total = 0.0, k4_sum = 0.0, se_sum = 0.0;
  for (int b = 0; b < kBuckets; ++b) {
    const auto u = static_cast<std::size_t>(b);
    if (w[u] <= 0.0) continue;
    const Bucket& bk = buckets[u];
    const double m2 = bk.s2 / bk.n;
    const double m4 = bk.s4 / bk.n;
    const double ratio = bk.k4_ratio / bk.n;
    k4_sum += bk.n * (m4 - 3.0 * m2 * m2) * ratio;
    se_sum += bk.n * 96.0 * std::pow(m2, 4);
    n_total += bk.n;
  }

  est.intercept = fit.intercept;
  est.shot = fit.slope;
  if (est.shot < 0.0) {
    est.warnings.push_back("negative shot-noise slope clamped to 0");
    est.shot = 0.0;
  }
  if (est.intercept < 0.0) {
    est.warnings.push_back("negative read-noise intercept clamped to 0");
    est.intercept = 0.0;
  }
  if (n_total > 0.0) {
    est.fourth_cumulant = k4_sum / n_total;
    est.fourth_cumulant_stderr = std::sqrt(se_sum) / n_total;
  }
  if (est.fourth_cumulant < -4.0 * est.fourth_cumulant_stderr && est.fourth_cumulant < 0.0) {
    est.quant = std::pow(-120.0 * est.fourth_cumulant, 0.25);
    // A uniform term cannot carry more variance than the whole intercept.
    est.quant = std::min(est.quant, std::sqrt(12.0 * est.intercept));
    est.quant_identified = true;
  }
  est.read = std::max(est.intercept - est.quant * est.quant / 12.0, 0.0);
  return est;
}

// --- banding ------------------------------------------------------------------

RowEstimate estimate_row(std::span<const PairedBurst> bursts) {
  return estimate_row(bursts, estimate_shot_read(bursts));
}

RowEstimate estimate_row(std::span<const PairedBurst> bursts, const ShotReadEstimate& noise) {
  require_bursts(bursts);
  RowEstimate est;

  struct ClipRows {
    std::vector<double> mean;  // time-averaged row means
    double frames = 0;
  };
  struct BurstRows {
    std::vector<double> floor;  // per-row pixel-noise variance of a row mean
    std::vector<ClipRows> clips;
  };
  std::vector<BurstRows> all;

  double within_sum = 0.0, within_dof = 0.0;
  for (const auto& burst : bursts) {
    const FrameBuffer& clean = burst.clean();
    const int w = clean.width();
    const int h = clean.height();
    BurstRows br;
    br.floor.resize(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r) {
      double xs = 0.0;
      for (float v : clean.row(r)) xs += v;
      br.floor[static_cast<std::size_t>(r)] = noise.pixel_variance(xs / w) / w;
    }
    for (std::size_t k = 0; k < burst.clip_count(); ++k) {
      const auto [begin, end] = burst.clip_range(k);
      const std::size_t n = end - begin;
      std::vector<std::vector<double>> m(n, std::vector<double>(static_cast<std::size_t>(h), 0.0));
      for (std::size_t t = 0; t < n; ++t) {
        const FrameBuffer& noisy = burst.noisy()[begin + t];
        for (int r = 0; r < h; ++r) {
          double s = 0.0;
          const auto nr = noisy.row(r);
          const auto cr = clean.row(r);
          for (int c = 0; c < w; ++c) s += static_cast<double>(nr[static_cast<std::size_t>(c)]) - cr[static_cast<std::size_t>(c)];
          m[t][static_cast<std::size_t>(r)] = s / w;
        }
      }
      ClipRows cr;
      cr.frames = static_cast<double>(n);
      cr.mean.assign(static_cast<std::size_t>(h), 0.0);
      for (std::size_t t = 0; t < n; ++t) {
        for (int r = 0; r < h; ++r) cr.mean[static_cast<std::size_t>(r)] += m[t][static_cast<std::size_t>(r)] / static_cast<double>(n);
      }
      if (n >= 2) {
        for (int r = 0; r < h; ++r) {
          double ss = 0.0;
          for (std::size_t t = 0; t < n; ++t) {
            const double d = m[t][static_cast<std::size_t>(r)] - cr.mean[static_cast<std::size_t>(r)];
            ss += d * d;
          }
          within_sum += ss - static_cast<double>(n - 1) * br.floor[static_cast<std::size_t>(r)];
          within_dof += static_cast<double>(n - 1);
        }
      }
      br.clips.push_back(std::move(cr));
    }
    all.push_back(std::move(br));
  }

  if (within_dof == 0.0) {
    throw EstimationError(EstimationErrc::single_frame_clips,
                          "every clip holds a single frame; per-frame and clip-constant banding cannot be separated");
  }
  const double row_raw = within_sum / within_dof;
  est.row = std::max(row_raw, 0.0);
  if (row_raw < 0.0) est.warnings.push_back("negative per-frame banding variance clamped to 0");

  // Clip-constant part: spread of time-averaged row means between clips of
  // the same burst, less the 1/F-attenuated per-frame part.
  double between_sum = 0.0, between_dof = 0.0;
  for (const auto& br : all) {
    const std::size_t nclips = br.clips.size();
    if (nclips < 2) continue;
    const std::size_t h = br.floor.size();
    for (std::size_t r = 0; r < h; ++r) {
      double mean = 0.0, atten = 0.0;
      for (const auto& c : br.clips) {
        mean += c.mean[r];
        atten += (est.row + br.floor[r]) / c.frames;
      }
      mean /= static_cast<double>(nclips);
      atten /= static_cast<double>(nclips);
      double ss = 0.0;
      for (const auto& c : br.clips) ss += (c.mean[r] - mean) * (c.mean[r] - mean);
      between_sum += ss - static_cast<double>(nclips - 1) * atten;
      between_dof += static_cast<double>(nclips - 1);
    }
  }
  if (between_dof == 0.0) {
    // One clip per burst: fall back to the spread across rows, which also
    // holds any fixed row structure.
    est.warnings.push_back(
        "no burst has two clips; clip-constant banding estimated across rows and includes fixed row structure");
    for (const auto& br : all) {
      const std::size_t h = br.floor.size();
      for (const auto& c : br.clips) {
        if (c.frames < 2) continue;
        double mean = 0.0, atten = 0.0;
        for (std::size_t r = 0; r < h; ++r) {
          mean += c.mean[r];
          atten += (est.row + br.floor[r]) / c.frames;
        }
        mean /= static_cast<double>(h);
        atten /= static_cast<double>(h);
        double ss = 0.0;
        for (std::size_t r = 0; r < h; ++r) ss += (c.mean[r] - mean) * (c.mean[r] - mean);
        between_sum += ss - static_cast<double>(h - 1) * atten;
        between_dof += static_cast<double>(h - 1);
      }
    }
  }
  const double row_t_raw = between_dof > 0.0 ? between_sum / between_dof : 0.0;
  est.row_t = std::max(row_t_raw, 0.0);
  if (row_t_raw < 0.0) est.warnings.push_back("negative clip-constant banding variance clamped to 0");
  return est;
}

// --- periodic ---------------------------------------------------------------

PeriodicEstimate estimate_periodic(std::span<const PairedBurst> bursts, const std::array<double, 3>& freqs) {
  return estimate_periodic(bursts, freqs, estimate_shot_read(bursts));
}

PeriodicEstimate estimate_periodic(std::span<const PairedBurst> bursts, const std::array<double, 3>& freqs,
                                   const ShotReadEstimate& noise) {
  require_bursts(bursts);
  PeriodicEstimate est;
  std::array<double, 3> amp2_sum{}, floor_sum{};
  double frames_total = 0.0;
  bool warned = false;

  for (const auto& burst : bursts) {
    const FrameBuffer& clean = burst.clean();
    const int w = clean.width();
    const int h = clean.height();

    // Projection bases and their leakage onto DC and onto each other.
    std::array<std::vector<double>, 3> cosb, sinb;
    std::array<double, 3> cc{}, ss{};
    std::array<bool, 3> has_sin{};
    for (std::size_t k = 0; k < 3; ++k) {
      cosb[k].resize(static_cast<std::size_t>(w));
      sinb[k].resize(static_cast<std::size_t>(w));
      for (int c = 0; c < w; ++c) {
        const double th = 2.0 * std::numbers::pi * freqs[k] * c;
        cosb[k][static_cast<std::size_t>(c)] = std::cos(th);
        sinb[k][static_cast<std::size_t>(c)] = std::sin(th);
        cc[k] += std::cos(th) * std::cos(th);
        ss[k] += std::sin(th) * std::sin(th);
      }
      has_sin[k] = ss[k] > 1e-9 * w;
    }
    if (!warned) {
      double leak = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        double dc = 0.0;
        for (double v : cosb[k]) dc += v;
        leak = std::max(leak, std::abs(dc) / cc[k]);
        for (std::size_t j = k + 1; j < 3; ++j) {
          double cross = 0.0;
          for (int c = 0; c < w; ++c) cross += cosb[k][static_cast<std::size_t>(c)] * cosb[j][static_cast<std::size_t>(c)];
          leak = std::max(leak, std::abs(cross) / std::sqrt(cc[k] * cc[j]));
        }
      }
      if (leak > 1e-6) {
        std::ostringstream msg;
        msg << "periodic frequencies are not bin-aligned for width " << w << " (leakage " << leak << ")";
        est.warnings.push_back(msg.str());
        warned = true;
      }
    }

    double xmean = 0.0;
    for (float v : clean.data()) xmean += v;
    xmean /= static_cast<double>(clean.size());
    const double v = noise.pixel_variance(xmean);

    for (std::size_t k = 0; k < burst.clip_count(); ++k) {
      const auto [begin, end] = burst.clip_range(k);
      const double n = static_cast<double>(end - begin);
      const double atten = n >= 2 ? 1.0 - 1.0 / n : 1.0;
      const auto mean = clip_temporal_mean(burst, begin, end);
      const auto frames = static_cast<std::int64_t>(end - begin);
      std::vector<std::array<double, 3>> amp2(static_cast<std::size_t>(frames));
      parallel_for(frames, Exec::parallel, [&](std::int64_t t) {
        auto d = residual_of(burst.noisy()[begin + static_cast<std::size_t>(t)], clean);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= mean[i];
        for (std::size_t q = 0; q < 3; ++q) {
          double ac = 0.0, as = 0.0;
          for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
              const double val = d[static_cast<std::size_t>(r) * w + c];
              ac += val * cosb[q][static_cast<std::size_t>(c)];
              as += val * sinb[q][static_cast<std::size_t>(c)];
            }
          }
          ac /= h * cc[q];
          // A Nyquist-rate cosine only exposes a cos(phi); E[(a cos phi)^2] = lambda^2 / 2.
          amp2[static_cast<std::size_t>(t)][q] = has_sin[q] ? ac * ac + (as / (h * ss[q])) * (as / (h * ss[q])) : 2.0 * ac * ac;
        }
      });
      for (std::size_t q = 0; q < 3; ++q) {
        const double floor = has_sin[q] ? v / (h * cc[q]) + v / (h * ss[q]) : 2.0 * v / (h * cc[q]);
        for (const auto& a : amp2) {
          amp2_sum[q] += a[q] / atten;
          floor_sum[q] += floor;
        }
      }
      frames_total += n;
    }
  }

  for (std::size_t q = 0; q < 3; ++q) {
    const double lam2 = (amp2_sum[q] - floor_sum[q]) / frames_total;
    est.lambda_f[q] = lam2 > 0.0 ? std::sqrt(lam2) : 0.0;
  }
  return est;
}

// --- fixed pattern -------------------------------------------------------------

FrameBuffer estimate_fixed_pattern(std::span<const PairedBurst> bursts) {
  require_bursts(bursts);
  const FrameBuffer& ref = bursts.front().clean();
  std::size_t total = 0;
  for (const auto& b : bursts) {
    if (!b.clean().same_geometry(ref)) {
      throw EstimationError(EstimationErrc::geometry_mismatch,
                            "bursts differ in geometry; a fixed pattern needs one sensor geometry");
    }
    total += b.noisy().size();
  }
  if (total < 2) {
    throw EstimationError(EstimationErrc::too_few_frames, "fixed-pattern estimate needs at least two frames");
  }
  std::vector<double> acc(ref.size(), 0.0);
  for (const auto& b : bursts) {
    const auto c = b.clean().data();
    for (const auto& f : b.noisy()) {
      const auto n = f.data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(n[i]) - static_cast<double>(c[i]);
    }
  }
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(total));
  return FrameBuffer(ref.width(), ref.height(), std::move(out), Domain::residual, ref.cfa());
}

FrameBuffer remove_row_means(const FrameBuffer& frame) {
  std::vector<float> out(frame.data().begin(), frame.data().end());
  const int w = frame.width();
  for (int r = 0; r < frame.height(); ++r) {
    double s = 0.0;
    for (float v : frame.row(r)) s += v;
    const double m = s / w;
    for (int c = 0; c < w; ++c) {
      auto& v = out[static_cast<std::size_t>(r) * w + c];
      v = static_cast<float>(v - m);
    }
  }
  return FrameBuffer(frame.width(), frame.height(), std::move(out), Domain::residual, frame.cfa());
}

}  // namespace nightnoise
