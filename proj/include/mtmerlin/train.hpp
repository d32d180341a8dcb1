#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mtmerlin/estimator.hpp"
#include "mtmerlin/preprocess.hpp"

namespace mtmerlin {

struct LearningRateStep {
  int from_epoch;
  double rate;
};

/// Defaults follow the published schedule: 1000 epochs of 8 patches of
/// 256x256, learning rate 1e-3, 1e-4 after 10 epochs, 1e-5 after 910 epochs.
struct TrainConfig {
  int patch_size = 256;
  int batch_size = 8;
  int epochs = 1000;
  /// 0 derives the count from the dataset area (one pass over all pixels).
  int batches_per_epoch = 0;
  std::vector<LearningRateStep> schedule = {{0, 1e-3}, {10, 1e-4}, {910, 1e-5}};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Forward/backward in float; parameters and moments stay in double.
  bool single_precision = true;
};

void validate(const TrainConfig& config);
double learning_rate(const TrainConfig& config, int epoch);

struct TrainResult {
  EstimatorParams params;
  std::vector<double> loss_curve;  // mean per-pixel loss of each epoch
};

using EpochLogger = std::function<void(int epoch, double loss, double rate)>;

/// Input normalization from the training inputs: reference components scaled
/// to unit variance, auxiliary channels standardized with shared statistics,
/// output offset log(mean |z_ref|^2).
Normalization fit_normalization(const std::vector<InputSets>& data, AuxEncoding encoding);

/// Minimizes the two-term multi-temporal MERLIN objective with Adam. Every
/// batch evaluates f(A) against b_ref and f(B) against a_ref. Throws Diverged
/// when the loss stops being finite.
TrainResult train(const std::vector<WhitenedStack>& dataset, const ArchSpec& arch, const TrainConfig& config,
                  const EpochLogger& log = {});

/// Same, on prepared input sets (arch.encoding must match their encoding).
TrainResult train(const std::vector<InputSets>& dataset, const ArchSpec& arch, const TrainConfig& config,
                  const EpochLogger& log = {});

/// Loss and parameter gradients of one (A, B) pair on one patch, summed over
/// pixels. Used by training and by the gradient checks.
struct PatchGradient {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;
};

template <typename S>
PatchGradient patch_gradient(const EstimatorParams& params, const InputSets& patch);

/// Crops an input set to [y0, y0 + size) x [x0, x0 + size).
InputSets crop(const InputSets& in, int y0, int x0, int size);

}  // namespace mtmerlin
