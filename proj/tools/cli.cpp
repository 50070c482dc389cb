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

#include "nightnoise/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "nightnoise/calibrate.hpp"
#include "nightnoise/metrics.hpp"
#include "nightnoise/parallel.hpp"
#include "nightnoise/patches.hpp"
#include "nightnoise/pipeline.hpp"
#include "nightnoise/virtual_sensor.hpp"

namespace nightnoise {

namespace fs = std::filesystem;
using json = nlohmann::json;

// --- RunConfig ----------------------------------------------------------------

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      // paths
      "dataset", "params", "out", "clean", "real", "input",
      // run
      "seed", "threads", "verbose", "clip_id",
      // histogram
      "hist_bins", "hist_lo", "hist_hi", "hist_epsilon",
      // calibration
      "steps", "critic_lr", "gen_lr", "gp_coeff", "critic_ratio", "batch", "gp_batch", "trace_every", "bit_depth",
      "patch", "stride", "fourier_bins", "feature_hist_bins",
      // synthesis / evaluation
      "pairs", "ablate",
      // display
      "gamma", "wb", "equalize", "nir",
      // virtual sensor
      "width", "height", "bursts", "clips", "frames", "scene"};
  return keys;
}

bool RunConfig::is_known(const std::string& key) {
  const auto& k = known_keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::require(const std::string& key) const {
  const auto v = get(key);
  if (!v || v->empty()) throw ConfigError("missing required setting '" + key + "'");
  return *v;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("setting '" + key + "' has invalid value '" + text + "'");
  return v;
}

}  // namespace

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  const double d = parse_number<double>(key, *v);
  if (!std::isfinite(d)) throw ConfigError("setting '" + key + "' must be finite");
  return d;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  const auto v = get(key);
  return v ? parse_number<int>(key, *v) : fallback;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("setting '" + key + "' must be a boolean, got '" + *v + "'");
}

// --- commands -----------------------------------------------------------------

namespace {

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  bool verbose = false;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FrameError(FrameErrc::io_failure, dir.string(), "cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FrameError(FrameErrc::io_failure, path.string(), "cannot write " + path.string());
  out << text << "\n";
}

HistogramSpec histogram_from(const RunConfig& cfg) {
  HistogramSpec s;
  s.bins = cfg.get_int("hist_bins", s.bins);
  s.lo = cfg.get_double("hist_lo", s.lo);
  s.hi = cfg.get_double("hist_hi", s.hi);
  s.epsilon = cfg.get_double("hist_epsilon", s.epsilon);
  s.validate();
  return s;
}

NoiseParams load_params(const Context& ctx) {
  NoiseParams p = read_params(ctx.cfg.require("params"));
  p.seed = ctx.cfg.get_u64("seed", p.seed);
  return p;
}

int cmd_calibrate(Context& ctx) {
  const fs::path dataset = ctx.cfg.require("dataset");
  const fs::path out_dir = ctx.cfg.require("out");
  const auto bursts = read_dataset(dataset);

  CalibrationConfig cc;
  cc.seed = ctx.cfg.get_u64("seed", 0);
  cc.bit_depth = ctx.cfg.get_int("bit_depth", cc.bit_depth);
  cc.patch = ctx.cfg.get_int("patch", cc.patch);
  cc.stride = ctx.cfg.get_int("stride", cc.stride);
  cc.fourier_bins = ctx.cfg.get_int("fourier_bins", cc.fourier_bins);
  cc.hist_bins = ctx.cfg.get_int("feature_hist_bins", cc.hist_bins);
  CriticState& cs = cc.critic;
  cs.steps = ctx.cfg.get_int("steps", cs.steps);
  cs.critic_lr = ctx.cfg.get_double("critic_lr", cs.critic_lr);
  cs.gen_lr = ctx.cfg.get_double("gen_lr", cs.gen_lr);
  cs.gp_coeff = ctx.cfg.get_double("gp_coeff", cs.gp_coeff);
  cs.critic_ratio = ctx.cfg.get_int("critic_ratio", cs.critic_ratio);
  cs.batch = ctx.cfg.get_int("batch", cs.batch);
  cs.gp_batch = ctx.cfg.get_int("gp_batch", cs.gp_batch);
  cs.trace_every = ctx.cfg.get_int("trace_every", cs.trace_every);
  if (cs.steps < 0) throw ConfigError("steps must be >= 0");
  cc.refine = cs.steps > 0;
  if (cc.refine) cs.validate(0);

  const CalibrationReport rep = calibrate(bursts, cc);
  ensure_dir(out_dir);
  write_params(rep.params, out_dir / "params.json");
  const std::optional<std::string> pattern =
      rep.params.fixed_pattern ? std::optional<std::string>("fixed_pattern.rfr") : std::nullopt;
  write_text(out_dir / "calibration_report.json", calibration_report_json(rep, pattern));

  const NoiseParams& p = rep.params;
  ctx.out << "calibrated " << bursts.size() << " burst(s)\n";
  char line[256];
  std::snprintf(line, sizeof line,
                "  lambda_read %.4g  lambda_shot %.4g  lambda_row %.4g  lambda_row_t %.4g  lambda_quant %.4g\n"
                "  lambda_f %.4g %.4g %.4g\n  KLD moments %.5f  final %.5f\n",
                p.lambda_read, p.lambda_shot, p.lambda_row, p.lambda_row_t, p.lambda_quant, p.lambda_f[0],
                p.lambda_f[1], p.lambda_f[2], rep.kld_moment, rep.kld_final);
  ctx.out << line;
  for (const auto& w : rep.warnings) ctx.err << "warning: " << w << "\n";
  ctx.out << "wrote " << (out_dir / "params.json").string() << "\n";
  if (rep.refinement && rep.refinement->diverged) {
    ctx.err << "error: refinement diverged; parameters are the last finite iterate\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_synthesize(Context& ctx) {
  const fs::path clean_dir = ctx.cfg.require("clean");
  const fs::path out_dir = ctx.cfg.require("out");
  const NoiseParams params = load_params(ctx);
  const Clip clean = read_clip(clean_dir);
  const std::uint64_t clip_id = ctx.cfg.get_u64("clip_id", 0);
  const Clip noisy = synthesize_clip(clean, params, clip_id);
  ensure_dir(out_dir);
  write_clip(noisy, out_dir / "noisy");
  ctx.out << "wrote " << noisy.size() << " noisy frame(s) to " << (out_dir / "noisy").string() << "\n";
  if (ctx.cfg.get_bool("pairs", false)) {
    const auto pairs = make_training_pairs(clean, params, clip_id, ctx.cfg.get_double("gamma", 1.0 / 2.2));
    write_training_pairs(pairs, out_dir / "pairs");
    ctx.out << "wrote " << pairs.size() << " training pair(s) to " << (out_dir / "pairs").string() << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(Context& ctx) {
  const fs::path real_dir = ctx.cfg.require("real");
  const fs::path out_dir = ctx.cfg.require("out");
  const NoiseParams params = load_params(ctx);
  const HistogramSpec spec = histogram_from(ctx.cfg);
  const int patch = ctx.cfg.get_int("patch", 64);
  const int stride = ctx.cfg.get_int("stride", patch);
  const auto bursts = read_dataset(real_dir);
  const ResidualPatchSet real = extract_residuals(bursts, patch, stride);
  const auto twin = synthesize_bursts(bursts, params, ctx.cfg.get_u64("clip_id", 0));
  const ResidualPatchSet synth = extract_residuals(twin, patch, stride);

  const double k = kld(real, synth, spec);
  const double sd = spectral_distance(real, synth);
  json report;
  report["kld"] = json::parse(metric_json("kld", k, spec));
  report["spectral_distance"] = sd;
  report["samples"] = real.values().size();
  ctx.out << "KLD " << k << "  spectral distance " << sd << "  (" << real.values().size() << " samples)\n";

  if (ctx.cfg.get_bool("ablate", false)) {
    const PairedBurst& b = bursts.front();
    const Clip clean(std::vector<FrameBuffer>(b.noisy().size(), b.clean()));
    const ResidualPatchSet real0 = extract_residuals(b, patch, stride);
    AblationOptions opt;
    opt.patch = patch;
    opt.stride = stride;
    const auto rows = run_ablation(default_ablation_ladder(), params, real0, clean, spec, opt);
    report["ablation"] = json::parse(ablation_json(rows, spec));
    ctx.out << ablation_table(rows);
  }
  ensure_dir(out_dir);
  write_text(out_dir / "metrics.json", report.dump(2));
  return kExitOk;
}

IspConfig isp_from(const RunConfig& cfg) {
  IspConfig c;
  c.gamma = cfg.get_double("gamma", c.gamma);
  c.equalize = cfg.get_bool("equalize", c.equalize);
  c.nir_in_display = cfg.get_bool("nir", c.nir_in_display);
  const std::string wb = cfg.get_string("wb", "gray-world");
  if (wb == "gray-world") {
    c.gray_world = true;
  } else if (wb == "none") {
    c.gray_world = false;
    c.wb_gains = {1.0, 1.0, 1.0, 1.0};
  } else {
    c.gray_world = false;
    std::istringstream in(wb);
    std::string tok;
    std::size_t k = 0;
    while (std::getline(in, tok, ',')) {
      if (k >= 4) throw ConfigError("wb takes at most four comma-separated gains");
      c.wb_gains[k++] = parse_number<double>("wb", trim(tok));
    }
    if (k < 3) throw ConfigError("wb must be gray-world, none, or 3-4 comma-separated gains");
  }
  c.validate();
  return c;
}

int cmd_pipeline(Context& ctx) {
  const fs::path in_dir = ctx.cfg.require("input");
  const fs::path out_dir = ctx.cfg.require("out");
  const IspConfig isp_cfg = isp_from(ctx.cfg);
  const Clip clip = read_clip(in_dir);
  ensure_dir(out_dir);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu", i);
    write_display(isp(clip[i], isp_cfg), out_dir / name);
  }
  ctx.out << "wrote " << clip.size() << " display frame(s) to " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_virtual_sensor(Context& ctx) {
  const fs::path out_dir = ctx.cfg.require("out");
  VirtualSensorLayout layout;
  layout.width = ctx.cfg.get_int("width", layout.width);
  layout.height = ctx.cfg.get_int("height", layout.height);
  layout.bursts = ctx.cfg.get_int("bursts", layout.bursts);
  layout.clips = ctx.cfg.get_int("clips", layout.clips);
  layout.frames = ctx.cfg.get_int("frames", layout.frames);
  if (const auto s = ctx.cfg.get("scene")) {
    const auto kind = parse_scene(*s);
    if (!kind) throw ConfigError("unknown scene '" + *s + "' (gradient, checker, drift)");
    layout.scene = *kind;
  }
  NoiseParams truth;
  if (ctx.cfg.has("params")) {
    truth = load_params(ctx);
  } else {
    truth = default_virtual_truth(layout, ctx.cfg.get_u64("seed", 0));
  }
  const auto bursts = render_virtual_dataset(truth, layout);
  ensure_dir(out_dir);
  if (bursts.size() == 1) {
    write_burst(bursts.front(), out_dir);
  } else {
    for (std::size_t b = 0; b < bursts.size(); ++b) {
      char name[32];
      std::snprintf(name, sizeof name, "burst_%03zu", b);
      write_burst(bursts[b], out_dir / name);
    }
  }
  write_params(truth, out_dir / "truth.json", "truth_fixed_pattern.rfr");
  std::size_t frames = 0;
  for (const auto& b : bursts) frames += b.noisy().size();
  ctx.out << "wrote " << bursts.size() << " burst(s), " << frames << " noisy frame(s) to " << out_dir.string() << "\n";
  return kExitOk;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> keys;  // value options
  std::vector<std::string> flags;  // boolean switches mapped to key=true
  int (*run)(Context&);
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"calibrate", "estimate noise parameters from a paired-burst dataset",
       {"dataset", "out", "steps", "critic_lr", "gen_lr", "gp_coeff", "critic_ratio", "batch", "gp_batch",
        "trace_every", "bit_depth", "patch", "stride", "fourier_bins", "feature_hist_bins"},
       {},
       cmd_calibrate},
      {"synthesize", "add synthetic noise to a clean clip", {"clean", "params", "out", "clip_id", "gamma"}, {"pairs"},
       cmd_synthesize},
      {"evaluate", "compare synthetic and real residual statistics",
       {"real", "params", "out", "patch", "stride", "clip_id", "hist_bins", "hist_lo", "hist_hi", "hist_epsilon"},
       {"ablate"},
       cmd_evaluate},
      {"pipeline", "render RAW clips to display PPMs", {"input", "out", "gamma", "wb"}, {"nir"}, cmd_pipeline},
      {"virtual-sensor", "render a synthetic paired-burst dataset with known parameters",
       {"params", "out", "width", "height", "bursts", "clips", "frames", "scene"},
       {},
       cmd_virtual_sensor},
  };
  return cmds;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

int exit_code_for(const FrameError& e) {
  return e.code() == FrameErrc::geometry_mismatch ? kExitGeometry : kExitInput;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-light RAW noise modelling toolkit", "nightnoise"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::string seed, threads;
  bool verbose = false;
  app.add_option("--config", config_path, "key=value settings file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_flag("--verbose", verbose, "print warnings and progress");

  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  bool no_equalize = false;
  std::vector<std::pair<const Command*, CLI::App*>> subs;
  for (const auto& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    for (const auto& k : c.keys) sub->add_option(dashed(k), values[k]);
    for (const auto& f : c.flags) sub->add_flag(dashed(f), switches[f]);
    if (std::string(c.name) == "pipeline") sub->add_flag("--no-equalize", no_equalize, "skip histogram equalisation");
    subs.emplace_back(&c, sub);
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    Context ctx{config_path.empty() ? RunConfig{} : RunConfig::load(config_path), out, err};
    const Command* chosen = nullptr;
    for (const auto& [cmd, sub] : subs) {
      if (!sub->parsed()) continue;
      chosen = cmd;
      for (const auto& k : cmd->keys) {
        if (sub->get_option(dashed(k))->count() > 0) ctx.cfg.set(k, values[k]);
      }
      for (const auto& f : cmd->flags) {
        if (switches[f]) ctx.cfg.set(f, "true");
      }
      if (std::string(cmd->name) == "pipeline" && no_equalize) ctx.cfg.set("equalize", "false");
    }
    if (!seed.empty()) ctx.cfg.set("seed", seed);
    if (!threads.empty()) ctx.cfg.set("threads", threads);
    if (verbose) ctx.cfg.set("verbose", "true");
    ctx.verbose = ctx.cfg.get_bool("verbose", false);
    if (ctx.cfg.has("threads")) {
      const int t = ctx.cfg.get_int("threads", 1);
      if (t < 1) throw ConfigError("threads must be >= 1");
      set_thread_count(t);
    }
    if (ctx.verbose) err << "running " << chosen->name << " with " << thread_count() << " thread(s)\n";
    return chosen->run(ctx);
  } catch (const FrameError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const EstimationError& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == EstimationErrc::geometry_mismatch ? kExitGeometry : kExitInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace nightnoise
