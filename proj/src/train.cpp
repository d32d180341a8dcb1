#include "mtmerlin/train.hpp"

#include <cmath>
#include <string>

#include "mtmerlin/error.hpp"
#include "mtmerlin/parallel.hpp"

namespace mtmerlin {

void validate(const TrainConfig& c) {
  if (c.patch_size < 1 || c.batch_size < 1 || c.epochs < 0 || c.batches_per_epoch < 0) {
    throw Error(ErrorCode::InvalidArgument, "patch size, batch size and epochs must be positive");
  }
  if (c.schedule.empty() || c.schedule.front().from_epoch != 0) {
    throw Error(ErrorCode::InvalidArgument, "learning-rate schedule must start at epoch 0");
  }
  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    if (!(c.schedule[i].rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rates must be positive");
    if (i > 0 && c.schedule[i].from_epoch <= c.schedule[i - 1].from_epoch) {
      throw Error(ErrorCode::InvalidArgument, "learning-rate breakpoints must be ascending");
    }
  }
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0 && c.adam_eps > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid Adam moments");
  }
}

double learning_rate(const TrainConfig& c, int epoch) {
  double rate = c.schedule.front().rate;
  for (const auto& s : c.schedule) {
    if (epoch >= s.from_epoch) rate = s.rate;
  }
  return rate;
}

InputSets crop(const InputSets& in, int y0, int x0, int size) {
  if (y0 < 0 || x0 < 0 || y0 + size > in.H() || x0 + size > in.W()) {
    throw Error(ErrorCode::OutOfBounds, "crop outside input extent");
  }
  auto cut = [&](const RealImage& m) {
    RealImage out(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) out(y, x) = m(y0 + y, x0 + x);
    }
    return out;
  };
  InputSets c;
  c.ref_index = in.ref_index;
  c.encoding = in.encoding;
  c.a_ref = cut(in.a_ref);
  c.b_ref = cut(in.b_ref);
  for (const auto& a : in.aux) c.aux.push_back(cut(a));
  return c;
}

Normalization fit_normalization(const std::vector<InputSets>& data, AuxEncoding encoding) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  const int channels = data[0].channels();
  double ref_power = 0.0, ref_count = 0.0;
  double aux_sum = 0.0, aux_sq = 0.0, aux_count = 0.0;
  for (const auto& in : data) {
    if (in.channels() != channels) throw Error(ErrorCode::ShapeMismatch, "training inputs differ in channel count");
    for (std::size_t k = 0; k < in.a_ref.size(); ++k) {
      ref_power += in.a_ref.data[k] * in.a_ref.data[k] + in.b_ref.data[k] * in.b_ref.data[k];
    }
    ref_count += static_cast<double>(in.a_ref.size());
    for (const auto& a : in.aux) {
      for (double v : a.data) {
        aux_sum += v;
        aux_sq += v * v;
      }
      aux_count += static_cast<double>(a.size());
    }
  }
  const double mean_intensity = ref_power / ref_count;
  if (!(mean_intensity > 0.0)) throw Error(ErrorCode::NonPositiveInput, "training data has zero power");
  Normalization n;
  const double component_scale = 1.0 / std::sqrt(mean_intensity / 2.0);
  n.shift.assign(channels, 0.0);
  n.scale.assign(channels, component_scale);
  if (aux_count > 0.0 && encoding == AuxEncoding::LogIntensity) {
    const double mean = aux_sum / aux_count;
    const double sd = std::sqrt(std::max(aux_sq / aux_count - mean * mean, 1e-12));
    for (int c = 1; c < channels; ++c) {
      n.shift[c] = mean;
      n.scale[c] = 1.0 / sd;
    }
  }
  n.output_offset = std::log(mean_intensity);
  return n;
}

template <typename S>
PatchGradient patch_gradient(const EstimatorParams& params, const InputSets& patch) {
  PatchGradient out;
  for (Side side : {Side::A, Side::B}) {
    const auto ch = side_channels(patch, side);
    const RealImage& target = side == Side::A ? patch.b_ref : patch.a_ref;
    auto pass = forward<S>(params, ch);
    out.loss += merlin_loss(target, pass.w).total;
    auto g = backward<S>(params, pass, merlin_loss_grad(target, pass.w));
    if (out.grads.empty()) {
      out.grads = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g[i].size(); ++j) out.grads[i][j] += g[i][j];
      }
    }
  }
  return out;
}

template PatchGradient patch_gradient<float>(const EstimatorParams&, const InputSets&);
template PatchGradient patch_gradient<double>(const EstimatorParams&, const InputSets&);

TrainResult train(const std::vector<InputSets>& dataset, const ArchSpec& arch, const TrainConfig& config,
                  const EpochLogger& log) {
  validate(config);
  validate(arch);
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  double area = 0.0;
  for (const auto& in : dataset) {
    if (in.encoding != arch.encoding) throw Error(ErrorCode::ShapeMismatch, "training inputs use another aux encoding");
    if (in.channels() != arch.in_channels) {
      throw Error(ErrorCode::ShapeMismatch, "training inputs have " + std::to_string(in.channels()) +
                                                " channels, architecture expects " + std::to_string(arch.in_channels));
    }
    if (in.H() < config.patch_size || in.W() < config.patch_size) {
      throw Error(ErrorCode::ShapeMismatch, "training image smaller than the patch size");
    }
    area += static_cast<double>(in.H()) * in.W();
  }

  const RngHandle root(config.seed);
  TrainResult result;
  result.params = init_params(arch, root.split(1));
  result.params.norm = fit_normalization(dataset, arch.encoding);
  EstimatorParams& params = result.params;

  const int batches = config.batches_per_epoch > 0
                          ? config.batches_per_epoch
                          : std::max(1, static_cast<int>(area / (static_cast<double>(config.patch_size) *
                                                                 config.patch_size * config.batch_size)));
  const std::size_t n_tensors = params.tensors.size();
  std::vector<std::vector<double>> m1(n_tensors), m2(n_tensors);
  for (std::size_t i = 0; i < n_tensors; ++i) {
    m1[i].assign(params.tensors[i].data.size(), 0.0);
    m2[i].assign(params.tensors[i].data.size(), 0.0);
  }
  RngHandle sampler = root.split(2);
  std::uint64_t step = 0;
  const double pixels_per_batch = 2.0 * config.batch_size * config.patch_size * config.patch_size;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate = learning_rate(config, epoch);
    double epoch_loss = 0.0;
    for (int b = 0; b < batches; ++b) {
      std::vector<InputSets> patches;
      for (int i = 0; i < config.batch_size; ++i) {
        const InputSets& src = dataset[sampler.below(dataset.size())];
        const int y0 = static_cast<int>(sampler.below(src.H() - config.patch_size + 1));
        const int x0 = static_cast<int>(sampler.below(src.W() - config.patch_size + 1));
        patches.push_back(crop(src, y0, x0, config.patch_size));
      }
      std::vector<PatchGradient> per_patch(patches.size());
      try {
        parallel_for(static_cast<int>(patches.size()), config.threads, [&](int i) {
          per_patch[i] = config.single_precision ? patch_gradient<float>(params, patches[i])
                                                 : patch_gradient<double>(params, patches[i]);
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFinite) throw;
        throw Error(ErrorCode::Diverged, "loss overflow at epoch " + std::to_string(epoch) + " (" + e.what() + ")");
      }
      // Fixed-order reduction keeps serial and parallel runs identical.
      double loss = 0.0;
      std::vector<std::vector<double>> grad = std::move(per_patch[0].grads);
      loss += per_patch[0].loss;
      for (std::size_t i = 1; i < per_patch.size(); ++i) {
        loss += per_patch[i].loss;
        for (std::size_t t = 0; t < grad.size(); ++t) {
          for (std::size_t j = 0; j < grad[t].size(); ++j) grad[t][j] += per_patch[i].grads[t][j];
        }
      }
      loss /= pixels_per_batch;
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::Diverged, "loss became non-finite at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < n_tensors; ++t) {
        auto& w = params.tensors[t].data;
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double g = grad[t][j] / pixels_per_batch;
          if (!std::isfinite(g)) {
            throw Error(ErrorCode::Diverged, "gradient became non-finite at epoch " + std::to_string(epoch));
          }
          m1[t][j] = config.beta1 * m1[t][j] + (1.0 - config.beta1) * g;
          m2[t][j] = config.beta2 * m2[t][j] + (1.0 - config.beta2) * g * g;
          w[j] -= rate * (m1[t][j] / c1) / (std::sqrt(m2[t][j] / c2) + config.adam_eps);
        }
      }
      params.touch();
    }
    epoch_loss /= batches;
    result.loss_curve.push_back(epoch_loss);
    if (log) log(epoch, epoch_loss, rate);
  }
  return result;
}

TrainResult train(const std::vector<WhitenedStack>& dataset, const ArchSpec& arch, const TrainConfig& config,
                  const EpochLogger& log) {
  std::vector<InputSets> inputs;
  inputs.reserve(dataset.size());
  for (const auto& w : dataset) inputs.push_back(build_input_sets(w, arch.encoding));
  return train(inputs, arch, config, log);
}

}  // namespace mtmerlin
