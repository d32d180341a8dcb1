#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtmerlin/coherence.hpp"
#include "mtmerlin/config.hpp"
#include "mtmerlin/error.hpp"
#include "mtmerlin/estimator.hpp"
#include "mtmerlin/eval.hpp"
#include "mtmerlin/experiments.hpp"
#include "mtmerlin/params_io.hpp"
#include "mtmerlin/preprocess.hpp"
#include "mtmerlin/raster_io.hpp"
#include "mtmerlin/scene_sim.hpp"
#include "mtmerlin/slcs_io.hpp"
#include "mtmerlin/train.hpp"

namespace fs = std::filesystem;
using namespace mtmerlin;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
      return kExitConfig;
    case ErrorCode::NonFinite:
    case ErrorCode::Diverged:
    case ErrorCode::StaleTape:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void log_line(const std::string& event, const std::vector<std::pair<std::string, std::string>>& fields) {
  std::cout << "event=" << event;
  for (const auto& [k, v] : fields) std::cout << ' ' << k << '=' << v;
  std::cout << '\n' << std::flush;
}

// Options shared by every subcommand. Flags are copied into the config as
// overrides so that they take part in the hash.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> flag_values;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "key=value override (repeatable)");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

// Binds a flag to a config key; the flag wins over file and --set values.
void bind(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&c, key](const std::string& v) { c.flag_values.emplace_back(key, v); }, help);
}

Config build_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config::parse("", "<flags>") : Config::load(c.config_path);
  for (const auto& s : c.sets) cfg.apply_override(s);
  for (const auto& [k, v] : c.flag_values) cfg.set(k, v);
  return cfg;
}

void write_meta(const fs::path& target, const std::string& hash, std::map<std::string, std::string> fields) {
  fields["config_hash"] = hash;
  const fs::path path = target.string() + ".meta";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : fields) out << k << " = " << v << '\n';
}

std::map<std::string, std::string> read_meta(const fs::path& target) {
  std::map<std::string, std::string> out;
  const fs::path path = target.string() + ".meta";
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_log_preview(const fs::path& path, const RealImage& img, const std::string& hash) {
  RealImage l(img.H, img.W);
  double lo = 1e300, hi = -1e300;
  for (std::size_t k = 0; k < img.size(); ++k) {
    l.data[k] = std::log(std::max(img.data[k], 1e-300));
    lo = std::min(lo, l.data[k]);
    hi = std::max(hi, l.data[k]);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  write_pgm16(path.string(), l, lo, hi, {"config_hash=" + hash, "log_range=" + fmt(lo) + "," + fmt(hi)});
}

std::vector<LearningRateStep> parse_schedule(const std::string& text) {
  std::vector<LearningRateStep> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::Config, "key 'train.lr': expected epoch:rate pairs, got '" + item + "'");
    }
    try {
      out.push_back({std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "key 'train.lr': cannot parse '" + item + "'");
    }
  }
  return out;
}

AuxEncoding parse_encoding(const std::string& s) {
  if (s == "log") return AuxEncoding::LogIntensity;
  if (s == "reim") return AuxEncoding::ReIm;
  throw Error(ErrorCode::Config, "key 'arch.encoding': expected log or reim, got '" + s + "'");
}

ArchSpec arch_from(const Config& cfg) {
  ArchSpec a;
  a.depth = cfg.get_int("arch.depth", a.depth);
  a.base_width = cfg.get_int("arch.width", a.base_width);
  a.kernel = cfg.get_int("arch.kernel", a.kernel);
  a.leaky_slope = cfg.get_double("arch.slope", a.leaky_slope);
  a.encoding = parse_encoding(cfg.get_string("arch.encoding", "log"));
  return a;
}

TrainConfig train_from(const Config& cfg, int threads) {
  TrainConfig t;
  t.epochs = cfg.get_int("train.epochs", 5);
  t.patch_size = cfg.get_int("train.patch", 32);
  t.batch_size = cfg.get_int("train.batch", 4);
  t.batches_per_epoch = cfg.get_int("train.batches_per_epoch", 0);
  t.schedule = parse_schedule(cfg.get_string("train.lr", "0:1e-3,10:1e-4,910:1e-5"));
  t.seed = cfg.get_u64("train.seed", cfg.get_u64("seed", 1));
  t.single_precision = cfg.get_bool("train.single_precision", true);
  t.threads = threads;
  validate(t);
  return t;
}

// Reference date from the sidecar, unless the config names one.
int ref_index_for(const Config& cfg, const fs::path& stack_path) {
  const auto meta = read_meta(stack_path);
  int ref = 0;
  if (auto it = meta.find("ref_index"); it != meta.end()) ref = std::stoi(it->second);
  return cfg.get_int("input.ref", ref);
}

WhitenedStack load_input(const Config& cfg, const fs::path& path) {
  const ComplexStack stack = read_slcs(path);
  WhitenedStack w = as_whitened(stack, ref_index_for(cfg, path));
  const auto meta = read_meta(path);
  if (auto it = meta.find("whitened"); it != meta.end()) w.whitened = it->second == "1";
  if (cfg.has("input.dates")) w = select_dates(w, cfg.get_ints("input.dates", {}));
  return w;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& out_dir) {
  Config cfg = build_config(c);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const int size = cfg.get_int("scene.size", 64);
  const int T = cfg.get_int("scene.dates", 2);
  const std::string kind = cfg.get_string("scene.kind", "piecewise");
  const double level = cfg.get_double("scene.level", 1.0);
  PiecewiseSceneSpec ps;
  ps.H = ps.W = size;
  ps.T = T;
  ps.class_levels = cfg.get_doubles("scene.levels", ps.class_levels);
  ps.cell_size = cfg.get_int("scene.cell_size", ps.cell_size);
  ps.change_fraction = cfg.get_double("scene.change_fraction", ps.change_fraction);
  const double tau = cfg.get_double("coherence.tau", 0.0);
  const std::vector<double> sweep = cfg.get_doubles("coherence.taus", {});
  SarResponseSpec sar;
  const std::string mode = cfg.get_string("sar.mode", "identity");
  if (mode == "apodized") sar.mode = SarResponseSpec::Mode::ApodizedOversampled;
  else if (mode != "identity") throw Error(ErrorCode::Config, "key 'sar.mode': expected identity or apodized");
  sar.apodization.alpha = cfg.get_double("sar.alpha", sar.apodization.alpha);
  sar.oversample_y.num = sar.oversample_x.num = cfg.get_int("sar.oversample_num", 1);
  sar.oversample_y.den = sar.oversample_x.den = cfg.get_int("sar.oversample_den", 1);
  const PhaseRamp ramp{cfg.get_double("sar.ramp_fx", 0.0), cfg.get_double("sar.ramp_fy", 0.0), 0.0};
  cfg.reject_unknown();
  const std::string hash = cfg.hash();
  if (T < 1 || size < 8) throw Error(ErrorCode::Config, "scene.dates must be >= 1 and scene.size >= 8");

  const RngHandle root(seed);
  SceneModel scene;
  if (kind == "piecewise") {
    scene.r = make_piecewise_scene(ps, root.split(1));
  } else if (kind == "constant") {
    scene.r.assign(T, RealImage(size, size, level));
  } else {
    throw Error(ErrorCode::Config, "key 'scene.kind': expected piecewise or constant");
  }
  scene.sar = sar;
  if (ramp.fx != 0.0 || ramp.fy != 0.0) scene.psi.assign(T, ramp);

  fs::create_directories(out_dir);
  const bool is_sweep = !sweep.empty();
  for (double t : is_sweep ? sweep : std::vector<double>{tau}) {
    scene.coherence = ExponentialCoherence{default_dates(T), t};
    const double gamma_bar = average_coherence(coherence_matrix(scene.coherence));
    const SynthesisResult syn = synthesize_stack(scene, root.split(2), c.threads);
    const std::string stem = is_sweep ? "stack_gbar-" + fixed4(gamma_bar) : "stack";
    const fs::path stack_path = fs::path(out_dir) / (stem + ".slcs");
    const fs::path truth_path = fs::path(out_dir) / (stem + "_truth.slcs");
    write_slcs(stack_path, syn.z);
    std::vector<RealImage> truth;
    for (int d = 0; d < T; ++d) {
      RealImage m = syn.r_tilde[d];
      for (std::size_t k = 0; k < m.size(); ++k) m.data[k] += syn.d_tilde_intensity[d].data[k];
      truth.push_back(m);
    }
    write_slcs(truth_path, pack_real_maps(truth));
    const std::map<std::string, std::string> info = {
        {"kind", "stack"}, {"tau", fmt(t)}, {"gamma_bar", fmt(gamma_bar)}, {"seed", std::to_string(seed)}};
    write_meta(stack_path, hash, info);
    auto truth_info = info;
    truth_info["kind"] = "truth";
    write_meta(truth_path, hash, truth_info);
    write_log_preview(fs::path(out_dir) / (stem + "_truth0.pgm"), truth[0], hash);
    log_line("simulate", {{"tau", fmt(t)},
                          {"gamma_bar", fmt(gamma_bar)},
                          {"stack", stack_path.string()},
                          {"truth", truth_path.string()},
                          {"config_hash", hash}});
  }
  return 0;
}

int cmd_preprocess(const Common& c, const std::string& in_path, const std::string& out_path) {
  Config cfg = build_config(c);
  const int ref = cfg.get_int("preprocess.ref", 0);
  const bool recenter = cfg.get_bool("preprocess.recenter", true);
  WhitenParams wp;
  wp.enabled = cfg.get_bool("preprocess.whiten", true);
  wp.coherence_window = cfg.get_int("preprocess.coh_window", wp.coherence_window);
  wp.ds_quantile = cfg.get_double("preprocess.ds_quantile", wp.ds_quantile);
  wp.guard = cfg.get_double("preprocess.guard", wp.guard);
  cfg.reject_unknown();
  const std::string hash = cfg.hash();

  const ComplexStack stack = read_slcs(fs::path(in_path));
  if (ref < 0 || ref >= stack.T()) throw Error(ErrorCode::Config, "key 'preprocess.ref': date outside the stack");
  SpectralShift shift{};
  if (recenter) shift = estimate_spectral_shift(stack.plane(ref));
  log_line("stage", {{"stage", "center"}, {"fx", fmt(shift.fx)}, {"fy", fmt(shift.fy)}});
  const ComplexStack centered = recenter_spectrum(stack, shift);
  const WhitenedStack w = whiten_stack(centered, ref, wp, [](std::string_view stage, std::string_view detail) {
    std::cout << "event=stage stage=" << stage << ' ' << detail << '\n';
  });
  if (!(w.data.plane(ref).data == centered.plane(ref).data)) {
    std::cerr << "error: reference date changed during whitening\n";
    return kExitNumerical;
  }

  const fs::path out(out_path);
  ensure_parent(out);
  write_slcs(out, w.data);
  write_meta(out, hash,
             {{"kind", "preprocessed"},
              {"ref_index", std::to_string(ref)},
              {"whitened", w.whitened ? "1" : "0"},
              {"shift_fx", fmt(shift.fx)},
              {"shift_fy", fmt(shift.fy)},
              {"saturated", std::to_string(w.saturated)}});
  if (w.whitened) {
    std::vector<RealImage> coh;
    for (int t = 0; t < w.data.T(); ++t) {
      RealImage m(w.data.H(), w.data.W(), 0.0);
      if (t != ref) {
        for (std::size_t k = 0; k < m.size(); ++k) m.data[k] = std::abs(w.maps[t].gamma.data[k]);
      }
      coh.push_back(m);
    }
    const fs::path coh_path = out.parent_path() / (out.stem().string() + "_coherence.slcs");
    write_slcs(coh_path, pack_real_maps(coh));
    write_meta(coh_path, hash, {{"kind", "coherence_modulus"}, {"ref_index", std::to_string(ref)}});
  }
  log_line("preprocess", {{"output", out.string()},
                          {"whitened", w.whitened ? "1" : "0"},
                          {"saturated", std::to_string(w.saturated)},
                          {"ref_unchanged", "1"},
                          {"config_hash", hash}});
  return 0;
}

int cmd_train(const Common& c, const std::vector<std::string>& inputs, const std::string& out_path) {
  Config cfg = build_config(c);
  ArchSpec arch = arch_from(cfg);
  const TrainConfig tc = train_from(cfg, c.threads);
  const std::string dtype = cfg.get_string("params.dtype", "f64");
  if (dtype != "f64" && dtype != "f32") throw Error(ErrorCode::Config, "key 'params.dtype': expected f32 or f64");
  std::vector<InputSets> data;
  for (const auto& p : inputs) data.push_back(build_input_sets(load_input(cfg, p), arch.encoding));
  cfg.reject_unknown();
  const std::string hash = cfg.hash();
  arch.in_channels = data.front().channels();

  TrainResult res = train(data, arch, tc, [](int epoch, double loss, double rate) {
    log_line("epoch", {{"epoch", std::to_string(epoch)}, {"loss", fmt(loss)}, {"lr", fmt(rate)}});
  });
  res.params.config_hash = hash;
  const fs::path out(out_path);
  ensure_parent(out);
  write_params(out, res.params, dtype == "f32" ? DType::F32 : DType::F64);
  write_series_csv(out.string() + ".loss.csv", "loss", res.loss_curve, "config_hash=" + hash);
  log_line("train", {{"params", out.string()},
                     {"in_channels", std::to_string(arch.in_channels)},
                     {"parameters", std::to_string(res.params.parameter_count())},
                     {"final_loss", res.loss_curve.empty() ? "nan" : fmt(res.loss_curve.back())},
                     {"config_hash", hash}});
  return 0;
}

int cmd_despeckle(const Common& c, const std::string& params_path, const std::string& in_path,
                  const std::string& out_path) {
  Config cfg = build_config(c);
  const EstimatorParams params = read_params(fs::path(params_path));
  const WhitenedStack w = load_input(cfg, in_path);
  cfg.reject_unknown();
  const std::string hash = cfg.hash();
  const RealImage est = despeckle(params, w);
  const fs::path out(out_path);
  ensure_parent(out);
  write_slcs(out, pack_real_maps({est}));
  write_meta(out, hash, {{"kind", "estimate"}, {"params_hash", params.config_hash}});
  const fs::path preview = out.parent_path() / (out.stem().string() + ".pgm");
  write_log_preview(preview, est, hash);
  double mean = 0.0;
  for (double v : est.data) mean += v;
  log_line("despeckle", {{"output", out.string()},
                         {"preview", preview.string()},
                         {"mean", fmt(mean / static_cast<double>(est.size()))},
                         {"config_hash", hash}});
  return 0;
}

ExperimentConfig experiment_from(const Config& cfg, int threads) {
  ExperimentConfig e;
  e.size = cfg.get_int("exp.size", e.size);
  e.series_length = cfg.get_int("exp.series_length", e.series_length);
  e.ref_index = cfg.get_int("exp.ref", e.ref_index);
  e.class_levels = cfg.get_doubles("exp.levels", e.class_levels);
  e.cell_size = cfg.get_int("exp.cell_size", e.cell_size);
  e.change_fraction = cfg.get_double("exp.change_fraction", e.change_fraction);
  e.train_locations = cfg.get_int("exp.train_locations", e.train_locations);
  e.train_realizations = cfg.get_int("exp.train_realizations", e.train_realizations);
  e.test_locations = cfg.get_int("exp.test_locations", e.test_locations);
  e.draws = cfg.get_int("exp.draws", e.draws);
  e.realizations = cfg.get_int("exp.realizations", e.realizations);
  e.whiten.enabled = cfg.get_bool("exp.whiten", false);
  e.whiten.coherence_window = cfg.get_int("exp.coh_window", e.whiten.coherence_window);
  e.whiten.ds_quantile = cfg.get_double("exp.ds_quantile", e.whiten.ds_quantile);
  e.peak = cfg.get_double("exp.peak", e.peak);
  e.seed = cfg.get_u64("seed", e.seed);
  e.arch = arch_from(cfg);
  e.train = train_from(cfg, threads);
  e.threads = threads;
  return e;
}

int cmd_evaluate(const Common& c, const std::string& experiment, const std::string& estimate_path,
                 const std::string& truth_path, const std::string& params_path, const std::string& out_dir) {
  Config cfg = build_config(c);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  if (experiment.empty()) {
    if (estimate_path.empty() || truth_path.empty()) {
      throw Error(ErrorCode::Config, "evaluate needs --experiment or both --estimate and --truth");
    }
    const int ref = cfg.get_int("eval.ref", 0);
    const std::optional<double> peak =
        cfg.has("eval.peak") ? std::optional<double>(cfg.get_double("eval.peak", 0.0)) : std::nullopt;
    const std::vector<double> profile = cfg.get_doubles("eval.profile", {});
    cfg.reject_unknown();
    const std::string hash = cfg.hash();
    const RealImage est = unpack_real_maps(read_slcs(fs::path(estimate_path))).at(0);
    const auto truths = unpack_real_maps(read_slcs(fs::path(truth_path)));
    if (ref < 0 || ref >= static_cast<int>(truths.size())) throw Error(ErrorCode::Config, "key 'eval.ref': no such date");
    const double psnr = psnr_log(est, truths[ref], peak);
    {
      std::ofstream out(dir / "psnr.csv", std::ios::binary);
      if (!out) throw Error(ErrorCode::Io, "cannot write psnr.csv");
      out << "# config_hash=" << hash << "\nmetric,value\npsnr_db," << fmt(psnr) << '\n';
    }
    if (!profile.empty()) {
      if (profile.size() != 4) throw Error(ErrorCode::Config, "key 'eval.profile': expected y0,x0,y1,x1");
      const PixelPoint p0{profile[0], profile[1]}, p1{profile[2], profile[3]};
      write_series_csv((dir / "profile_estimate.csv").string(), "value", line_profile(est, p0, p1), "config_hash=" + hash);
      write_series_csv((dir / "profile_truth.csv").string(), "value", line_profile(truths[ref], p0, p1),
                       "config_hash=" + hash);
    }
    log_line("evaluate", {{"psnr_db", fmt(psnr)}, {"config_hash", hash}});
    return 0;
  }

  const ExperimentConfig base = experiment_from(cfg, c.threads);
  const ProgressLogger progress = [](const std::string& line) { std::cout << line << '\n' << std::flush; };
  if (experiment == "bias_variance") {
    const int location = cfg.get_int("exp.location", 0);
    const int reps = cfg.get_int("exp.bv_realizations", 10);
    cfg.reject_unknown();
    if (params_path.empty()) throw Error(ErrorCode::Config, "bias_variance needs --params");
    const std::string hash = cfg.hash();
    const EstimatorParams params = read_params(fs::path(params_path));
    const int n_inputs = 1 + (params.arch.in_channels - 1) / aux_channels_per_date(params.arch.encoding);
    const BiasVariance bv = bias_variance_maps(base, params, n_inputs, location, reps);
    write_image_csv((dir / "bias2.csv").string(), bv.bias2, "config_hash=" + hash);
    write_image_csv((dir / "variance.csv").string(), bv.variance, "config_hash=" + hash);
    double hi = 0.0;
    for (double v : bv.bias2.data) hi = std::max(hi, v);
    for (double v : bv.variance.data) hi = std::max(hi, v);
    if (!(hi > 0.0)) hi = 1.0;
    write_pgm16((dir / "bias2.pgm").string(), bv.bias2, 0.0, hi, {"config_hash=" + hash, "range=0," + fmt(hi)});
    write_pgm16((dir / "variance.pgm").string(), bv.variance, 0.0, hi, {"config_hash=" + hash, "range=0," + fmt(hi)});
    double mb = 0, mv = 0;
    for (std::size_t k = 0; k < bv.bias2.size(); ++k) {
      mb += bv.bias2.data[k];
      mv += bv.variance.data[k];
    }
    log_line("evaluate", {{"experiment", experiment},
                          {"mean_bias2", fmt(mb / bv.bias2.size())},
                          {"mean_variance", fmt(mv / bv.variance.size())},
                          {"config_hash", hash}});
    return 0;
  }

  EvalReport report;
  if (experiment == "psnr_vs_T") {
    const std::vector<int> counts = cfg.get_ints("exp.counts", {1, 2, 4, 8});
    cfg.reject_unknown();
    ExperimentConfig e = base;
    e.config_hash = cfg.hash();
    report = run_psnr_vs_T(e, counts, progress);
  } else if (experiment == "psnr_vs_coherence") {
    const std::vector<double> gammas = cfg.get_doubles("exp.gamma_bars", {0.05, 0.2, 0.6});
    const int n_inputs = cfg.get_int("exp.n_inputs", 3);
    cfg.reject_unknown();
    ExperimentConfig e = base;
    e.config_hash = cfg.hash();
    report = run_psnr_vs_coherence(e, gammas, n_inputs, progress);
  } else {
    throw Error(ErrorCode::Config, "unknown experiment '" + experiment +
                                       "' (expected psnr_vs_T, psnr_vs_coherence or bias_variance)");
  }
  write_rows_csv((dir / "rows.csv").string(), report);
  write_summary_csv((dir / "summary.csv").string(), report);
  for (std::size_t i = 0; i < report.loss_curves.size(); ++i) {
    write_series_csv((dir / ("loss_" + std::to_string(i) + ".csv")).string(), "loss", report.loss_curves[i],
                     "config_hash=" + report.config_hash);
  }
  for (const auto& s : report.summary) {
    log_line("summary", {{"n_inputs", std::to_string(s.n_inputs)},
                         {"gamma_bar", fmt(s.gamma_bar)},
                         {"whitened", s.whitened ? "1" : "0"},
                         {"median_psnr_db", fmt(s.stats.median)}});
  }
  log_line("evaluate", {{"experiment", experiment}, {"rows", std::to_string(report.rows.size())},
                        {"config_hash", report.config_hash}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-temporal SAR despeckling toolkit"};
  app.require_subcommand(1);

  Common sim_c, pre_c, train_c, desp_c, eval_c;

  std::string sim_out = "out";
  CLI::App* sim = app.add_subcommand("simulate", "simulate speckled stacks and their truth maps");
  add_common(sim, sim_c);
  sim->add_option("-o,--out", sim_out, "output directory");
  bind(sim, sim_c, "--size", "scene.size", "image side in pixels");
  bind(sim, sim_c, "--dates", "scene.dates", "number of dates");
  bind(sim, sim_c, "--tau", "coherence.tau", "coherence time constant (0 = independent dates)");
  bind(sim, sim_c, "--tau-sweep", "coherence.taus", "comma-separated tau values, one stack each");
  bind(sim, sim_c, "--seed", "seed", "random seed");

  std::string pre_in, pre_out;
  CLI::App* pre = app.add_subcommand("preprocess", "center spectra and whiten a stack");
  add_common(pre, pre_c);
  pre->add_option("-i,--in", pre_in, "input SLCS stack")->required()->check(CLI::ExistingFile);
  pre->add_option("-o,--out", pre_out, "output SLCS stack")->required();
  bind(pre, pre_c, "--ref-date", "preprocess.ref", "reference date index");
  bind(pre, pre_c, "--whiten", "preprocess.whiten", "on or off");
  bind(pre, pre_c, "--coh-window", "preprocess.coh_window", "coherence window (odd)");
  bind(pre, pre_c, "--ds-quantile", "preprocess.ds_quantile", "scatterer quantile (1 disables)");

  std::vector<std::string> train_in;
  std::string train_out;
  CLI::App* tr = app.add_subcommand("train", "train an estimator");
  add_common(tr, train_c);
  tr->add_option("-i,--in", train_in, "preprocessed SLCS stacks")->required()->check(CLI::ExistingFile);
  tr->add_option("-o,--out", train_out, "output parameter file")->required();
  bind(tr, train_c, "--epochs", "train.epochs", "training epochs");
  bind(tr, train_c, "--patch", "train.patch", "patch size");
  bind(tr, train_c, "--dates", "input.dates", "comma-separated extra date indices");

  std::string desp_params, desp_in, desp_out;
  CLI::App* ds = app.add_subcommand("despeckle", "estimate the reference-date reflectivity");
  add_common(ds, desp_c);
  ds->add_option("-p,--params", desp_params, "parameter file")->required()->check(CLI::ExistingFile);
  ds->add_option("-i,--in", desp_in, "preprocessed SLCS stack")->required()->check(CLI::ExistingFile);
  ds->add_option("-o,--out", desp_out, "output SLCS estimate")->required();
  bind(ds, desp_c, "--dates", "input.dates", "comma-separated extra date indices");

  std::string ev_exp, ev_est, ev_truth, ev_params, ev_out = "eval";
  CLI::App* ev = app.add_subcommand("evaluate", "PSNR of an estimate, or a full experiment");
  add_common(ev, eval_c);
  ev->add_option("--experiment", ev_exp, "psnr_vs_T, psnr_vs_coherence or bias_variance");
  ev->add_option("--estimate", ev_est, "SLCS estimate")->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth, "SLCS truth maps")->check(CLI::ExistingFile);
  ev->add_option("-p,--params", ev_params, "parameter file (bias_variance)")->check(CLI::ExistingFile);
  ev->add_option("-o,--out", ev_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_c, sim_out);
    if (*pre) return cmd_preprocess(pre_c, pre_in, pre_out);
    if (*tr) return cmd_train(train_c, train_in, train_out);
    if (*ds) return cmd_despeckle(desp_c, desp_params, desp_in, desp_out);
    if (*ev) return cmd_evaluate(eval_c, ev_exp, ev_est, ev_truth, ev_params, ev_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
