#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtmerlin/estimator.hpp"
#include "mtmerlin/eval.hpp"
#include "mtmerlin/preprocess.hpp"
#include "mtmerlin/scene_sim.hpp"
#include "mtmerlin/train.hpp"

namespace mtmerlin {

/// Simulated time-series family shared by the evaluation protocols.
///
/// Each location is a piecewise-constant scene of `series_length` dates with
/// class relabeling between dates; each realization is an independent speckle
/// draw. Coherence follows the exponential model on dates 0..series_length-1.
struct ExperimentConfig {
  int size = 128;
  int series_length = 8;
  int ref_index = 0;
  std::vector<double> class_levels = {1.0, 3.1622776601683795, 10.0};
  int cell_size = 16;
  double change_fraction = 0.2;

  int train_locations = 16;
  int train_realizations = 1;
  int test_locations = 4;
  int draws = 3;
  int realizations = 2;

  ArchSpec arch;  // in_channels is set per network
  TrainConfig train;
  WhitenParams whiten{.enabled = false, .coherence_window = 7, .ds_quantile = 1.0};
  /// Shared PSNR peak on natural-log reflectivities (10 dB span by default).
  double peak = 2.302585092994046;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string config_hash;
};

struct PsnrRow {
  int n_inputs = 1;
  double gamma_bar = 0.0;
  double tau = 0.0;
  bool whitened = false;
  int location = 0;
  int draw = 0;
  int realization = 0;
  double psnr = 0.0;
};

struct PsnrSummary {
  int n_inputs = 1;
  double gamma_bar = 0.0;
  double tau = 0.0;
  bool whitened = false;
  BoxStats stats;
};

struct EvalReport {
  std::string experiment;
  std::string config_hash;
  std::vector<PsnrRow> rows;
  std::vector<PsnrSummary> summary;
  std::vector<std::vector<double>> loss_curves;  // one per trained network, in summary order
};

/// One simulated series after centering and (optional) whitening, with truth.
struct SimulatedSeries {
  WhitenedStack stack;
  RealImage truth_ref;  // r~_ref + |d~_ref|^2
};

SimulatedSeries simulate_series(const ExperimentConfig& cfg, double tau, bool train_split, int location,
                                int realization);

/// Sub-stack made of the reference date followed by `extra` dates; the
/// reference becomes index 0.
WhitenedStack select_dates(const WhitenedStack& full, const std::vector<int>& extra);

using ProgressLogger = std::function<void(const std::string& line)>;

/// Trains a network on `n_inputs` dates (reference + n_inputs - 1 drawn as
/// nested sets per training series).
TrainResult train_network(const ExperimentConfig& cfg, int n_inputs, double tau, bool whiten,
                          const ProgressLogger& log = {});

/// Despeckles every (location, draw, realization) of the test split.
std::vector<PsnrRow> evaluate_network(const ExperimentConfig& cfg, const EstimatorParams& params, int n_inputs,
                                      double tau, bool whiten);

/// Networks for each input count on temporally independent speckle.
EvalReport run_psnr_vs_T(const ExperimentConfig& cfg, const std::vector<int>& input_counts,
                         const ProgressLogger& log = {});

/// One network with `n_inputs` dates per average-coherence target, plus the
/// single-date baseline (reported with n_inputs = 1, gamma_bar = 0).
EvalReport run_psnr_vs_coherence(const ExperimentConfig& cfg, const std::vector<double>& gamma_bars, int n_inputs,
                                 const ProgressLogger& log = {});

/// Log-domain bias^2 / variance maps over `realizations` speckle draws of one
/// test location.
BiasVariance bias_variance_maps(const ExperimentConfig& cfg, const EstimatorParams& params, int n_inputs,
                                int location, int realizations);

void write_rows_csv(const std::string& path, const EvalReport& report);
void write_summary_csv(const std::string& path, const EvalReport& report);

}  // namespace mtmerlin
