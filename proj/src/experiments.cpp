#include "mtmerlin/experiments.hpp"

#include <cstdio>
#include <fstream>

#include "mtmerlin/coherence.hpp"
#include "mtmerlin/error.hpp"
#include "mtmerlin/merlin_loss.hpp"
#include "mtmerlin/parallel.hpp"

namespace mtmerlin {

namespace {

constexpr std::uint64_t kTrainSalt = 0x747261696e;
constexpr std::uint64_t kTestSalt = 0x74657374;
constexpr std::uint64_t kSceneSalt = 0x7363656e65;
constexpr std::uint64_t kSpeckleSalt = 0x737065636b;
constexpr std::uint64_t kDrawSalt = 0x64726177;

RngHandle location_rng(const ExperimentConfig& cfg, bool train_split, int location) {
  return RngHandle(cfg.seed).split(train_split ? kTrainSalt : kTestSalt).split(static_cast<std::uint64_t>(location));
}

std::vector<int> draw_extras(const ExperimentConfig& cfg, bool train_split, int location, int realization, int draw,
                             int n_inputs) {
  if (n_inputs < 1 || n_inputs > cfg.series_length) {
    throw Error(ErrorCode::InvalidArgument, "input count must lie in [1, series_length]");
  }
  const RngHandle rng = location_rng(cfg, train_split, location)
                            .split(kDrawSalt)
                            .split(static_cast<std::uint64_t>(realization))
                            .split(static_cast<std::uint64_t>(draw));
  return nested_sets(cfg.series_length, cfg.ref_index, cfg.series_length - 1, rng).prefix(n_inputs - 1);
}

ArchSpec arch_for(const ExperimentConfig& cfg, int n_inputs) {
  ArchSpec arch = cfg.arch;
  arch.in_channels = 1 + (n_inputs - 1) * aux_channels_per_date(arch.encoding);
  return arch;
}

PsnrSummary summarize(const std::vector<PsnrRow>& rows, int n_inputs, double gamma_bar, double tau, bool whitened) {
  std::vector<double> values;
  values.reserve(rows.size());
  for (const PsnrRow& r : rows) values.push_back(r.psnr);
  return PsnrSummary{n_inputs, gamma_bar, tau, whitened, box_stats(std::move(values))};
}

void tag_rows(std::vector<PsnrRow>& rows, double gamma_bar) {
  for (PsnrRow& r : rows) r.gamma_bar = gamma_bar;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  return out;
}

}  // namespace

SimulatedSeries simulate_series(const ExperimentConfig& cfg, double tau, bool train_split, int location,
                                int realization) {
  if (cfg.ref_index < 0 || cfg.ref_index >= cfg.series_length) {
    throw Error(ErrorCode::InvalidArgument, "ref_index outside the series");
  }
  const RngHandle loc = location_rng(cfg, train_split, location);
  PiecewiseSceneSpec spec;
  spec.H = cfg.size;
  spec.W = cfg.size;
  spec.T = cfg.series_length;
  spec.class_levels = cfg.class_levels;
  spec.cell_size = cfg.cell_size;
  spec.change_fraction = cfg.change_fraction;

  SceneModel scene;
  scene.r = make_piecewise_scene(spec, loc.split(kSceneSalt));
  scene.coherence = ExponentialCoherence{default_dates(cfg.series_length), tau};
  SynthesisResult syn =
      synthesize_stack(scene, loc.split(kSpeckleSalt).split(static_cast<std::uint64_t>(realization)), 1);

  const ComplexStack centered = recenter_spectrum(syn.z, estimate_spectral_shift(syn.z.plane(cfg.ref_index)));

  SimulatedSeries out;
  out.stack = whiten_stack(centered, cfg.ref_index, cfg.whiten);
  out.truth_ref = syn.r_tilde[cfg.ref_index];
  const RealImage& dI = syn.d_tilde_intensity[cfg.ref_index];
  for (std::size_t i = 0; i < out.truth_ref.size(); ++i) out.truth_ref.data[i] += dI.data[i];
  return out;
}

WhitenedStack select_dates(const WhitenedStack& full, const std::vector<int>& extra) {
  const int T = full.data.T();
  std::vector<int> dates{full.ref_index};
  for (int t : extra) {
    if (t < 0 || t >= T || t == full.ref_index) throw Error(ErrorCode::InvalidArgument, "invalid extra date index");
    dates.push_back(t);
  }
  WhitenedStack out;
  out.data = ComplexStack(static_cast<int>(dates.size()), full.data.H(), full.data.W(), full.data.layout(),
                          full.data.dtype());
  out.ref_index = 0;
  out.whitened = full.whitened;
  out.saturated = full.saturated;
  for (std::size_t i = 0; i < dates.size(); ++i) {
    out.data.set_plane(static_cast<int>(i), full.data.plane(dates[i]));
    if (!full.maps.empty()) out.maps.push_back(full.maps[dates[i]]);
    if (!full.scatterers.empty()) out.scatterers.push_back(full.scatterers[dates[i]]);
  }
  return out;
}

TrainResult train_network(const ExperimentConfig& cfg, int n_inputs, double tau, bool whiten,
                          const ProgressLogger& log) {
  ExperimentConfig c = cfg;
  c.whiten.enabled = whiten && n_inputs > 1;
  const int count = c.train_locations * c.train_realizations;
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "training needs at least one series");
  std::vector<WhitenedStack> dataset(static_cast<std::size_t>(count));
  parallel_for(count, c.threads, [&](int i) {
    const int l = i / c.train_realizations;
    const int j = i % c.train_realizations;
    const SimulatedSeries s = simulate_series(c, tau, true, l, j);
    dataset[i] = select_dates(s.stack, draw_extras(c, true, l, j, 0, n_inputs));
  });
  TrainConfig tc = c.train;
  tc.threads = c.threads;
  EpochLogger epoch_log;
  if (log) {
    epoch_log = [&](int epoch, double loss, double rate) {
      log("event=epoch n_inputs=" + std::to_string(n_inputs) + " tau=" + fmt(tau) + " whiten=" +
          (c.whiten.enabled ? "on" : "off") + " epoch=" + std::to_string(epoch) + " loss=" + fmt(loss) +
          " lr=" + fmt(rate));
    };
  }
  TrainResult result = train(dataset, arch_for(c, n_inputs), tc, epoch_log);
  result.params.config_hash = cfg.config_hash;
  return result;
}

std::vector<PsnrRow> evaluate_network(const ExperimentConfig& cfg, const EstimatorParams& params, int n_inputs,
                                      double tau, bool whiten) {
  ExperimentConfig c = cfg;
  c.whiten.enabled = whiten && n_inputs > 1;
  const int L = c.test_locations, D = c.draws, R = c.realizations;
  if (L < 1 || D < 1 || R < 1) throw Error(ErrorCode::InvalidArgument, "evaluation needs locations, draws, realizations");
  std::vector<PsnrRow> rows(static_cast<std::size_t>(L) * D * R);
  parallel_for(L * R, c.threads, [&](int i) {
    const int l = i / R;
    const int j = i % R;
    const SimulatedSeries s = simulate_series(c, tau, false, l, j);
    for (int d = 0; d < D; ++d) {
      const WhitenedStack sub = select_dates(s.stack, draw_extras(c, false, l, j, d, n_inputs));
      const RealImage est = despeckle(params, sub);
      PsnrRow& row = rows[(static_cast<std::size_t>(l) * D + d) * R + j];
      row.n_inputs = n_inputs;
      row.tau = tau;
      row.whitened = c.whiten.enabled;
      row.location = l;
      row.draw = d;
      row.realization = j;
      row.psnr = psnr_log(est, s.truth_ref, c.peak);
    }
  });
  return rows;
}

EvalReport run_psnr_vs_T(const ExperimentConfig& cfg, const std::vector<int>& input_counts,
                         const ProgressLogger& log) {
  EvalReport report;
  report.experiment = "psnr_vs_T";
  report.config_hash = cfg.config_hash;
  const double gamma_bar = exponential_average_coherence(cfg.series_length, 0.0);
  for (int n : input_counts) {
    TrainResult net = train_network(cfg, n, 0.0, cfg.whiten.enabled, log);
    std::vector<PsnrRow> rows = evaluate_network(cfg, net.params, n, 0.0, cfg.whiten.enabled);
    tag_rows(rows, gamma_bar);
    report.summary.push_back(summarize(rows, n, gamma_bar, 0.0, cfg.whiten.enabled && n > 1));
    if (log) {
      log("event=summary n_inputs=" + std::to_string(n) + " median_psnr=" + fmt(report.summary.back().stats.median));
    }
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.loss_curves.push_back(std::move(net.loss_curve));
  }
  return report;
}

EvalReport run_psnr_vs_coherence(const ExperimentConfig& cfg, const std::vector<double>& gamma_bars, int n_inputs,
                                 const ProgressLogger& log) {
  EvalReport report;
  report.experiment = "psnr_vs_coherence";
  report.config_hash = cfg.config_hash;

  TrainResult base = train_network(cfg, 1, 0.0, false, log);
  std::vector<PsnrRow> base_rows = evaluate_network(cfg, base.params, 1, 0.0, false);
  report.summary.push_back(summarize(base_rows, 1, 0.0, 0.0, false));
  if (log) log("event=summary n_inputs=1 baseline=1 median_psnr=" + fmt(report.summary.back().stats.median));
  report.rows.insert(report.rows.end(), base_rows.begin(), base_rows.end());
  report.loss_curves.push_back(std::move(base.loss_curve));

  for (double g : gamma_bars) {
    const double tau = tau_for_average_coherence(cfg.series_length, g);
    const double achieved = exponential_average_coherence(cfg.series_length, tau);
    TrainResult net = train_network(cfg, n_inputs, tau, cfg.whiten.enabled, log);
    std::vector<PsnrRow> rows = evaluate_network(cfg, net.params, n_inputs, tau, cfg.whiten.enabled);
    tag_rows(rows, achieved);
    report.summary.push_back(summarize(rows, n_inputs, achieved, tau, cfg.whiten.enabled));
    if (log) {
      log("event=summary n_inputs=" + std::to_string(n_inputs) + " gamma_bar=" + fmt(achieved) + " tau=" + fmt(tau) +
          " median_psnr=" + fmt(report.summary.back().stats.median));
    }
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.loss_curves.push_back(std::move(net.loss_curve));
  }
  return report;
}

BiasVariance bias_variance_maps(const ExperimentConfig& cfg, const EstimatorParams& params, int n_inputs,
                                int location, int realizations) {
  ExperimentConfig c = cfg;
  c.whiten.enabled = c.whiten.enabled && n_inputs > 1;
  std::vector<RealImage> estimates(static_cast<std::size_t>(realizations));
  RealImage truth;
  parallel_for(realizations, c.threads, [&](int j) {
    const SimulatedSeries s = simulate_series(c, 0.0, false, location, j);
    estimates[j] = despeckle(params, select_dates(s.stack, draw_extras(c, false, location, j, 0, n_inputs)));
    if (j == 0) truth = s.truth_ref;
  });
  return bias_variance(estimates, truth);
}

void write_rows_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out = open_out(path);
  out << "# config_hash=" << report.config_hash << "\n";
  out << "experiment,n_inputs,gamma_bar,tau,whitened,location,draw,realization,psnr_db\n";
  for (const PsnrRow& r : report.rows) {
    out << report.experiment << ',' << r.n_inputs << ',' << fmt(r.gamma_bar) << ',' << fmt(r.tau) << ','
        << (r.whitened ? 1 : 0) << ',' << r.location << ',' << r.draw << ',' << r.realization << ',' << fmt(r.psnr)
        << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

void write_summary_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out = open_out(path);
  out << "# config_hash=" << report.config_hash << "\n";
  out << "experiment,n_inputs,gamma_bar,tau,whitened,count,min,q1,median,q3,max\n";
  for (const PsnrSummary& s : report.summary) {
    out << report.experiment << ',' << s.n_inputs << ',' << fmt(s.gamma_bar) << ',' << fmt(s.tau) << ','
        << (s.whitened ? 1 : 0) << ',' << s.stats.count << ',' << fmt(s.stats.min) << ',' << fmt(s.stats.q1) << ','
        << fmt(s.stats.median) << ',' << fmt(s.stats.q3) << ',' << fmt(s.stats.max) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

}  // namespace mtmerlin
