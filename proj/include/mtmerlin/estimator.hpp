#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtmerlin/merlin_loss.hpp"
#include "mtmerlin/rng.hpp"
#include "mtmerlin/tape.hpp"

namespace mtmerlin {

/// U-Net-style encoder-decoder with a single output plane.
///
/// depth >= 1: `depth` max-pool levels; widths base, 2 base, 2 base, ...;
/// two 3x3 convolutions per encoder level (one at the bottom), nearest
/// upsampling + convolution, concatenated skip, one convolution per decoder
/// level, and a convolutional head to one plane.
/// depth == 0: two convolutions at full resolution and the head.
/// base_width == 0: the output is a single learned constant (bias-only model).
struct ArchSpec {
  int in_channels = 1;
  int depth = 2;
  int base_width = 16;
  int kernel = 3;
  double leaky_slope = 0.1;
  AuxEncoding encoding = AuxEncoding::LogIntensity;

  bool operator==(const ArchSpec&) const = default;
};

void validate(const ArchSpec& arch);

struct ParamTensor {
  std::string name;
  std::vector<int> shape;  // (Cout, Cin, k, k) for weights, (Cout) for biases
  std::vector<double> data;
};

/// Per-channel input affine map x' = (x - shift) * scale, and the constant
/// added to the network output (log of the mean training intensity).
struct Normalization {
  std::vector<double> shift;
  std::vector<double> scale;
  double output_offset = 0.0;
};

struct EstimatorParams {
  ArchSpec arch;
  std::vector<ParamTensor> tensors;
  Normalization norm;
  std::string config_hash;
  /// Bumped on every mutation; tapes remember the version they were built on.
  std::uint64_t version = 0;

  std::size_t parameter_count() const;
  void touch() { ++version; }
};

/// He-initialized weights, zero biases, identity normalization.
EstimatorParams init_params(const ArchSpec& arch, const RngHandle& rng);

/// Estimator input planes for one side: {a_ref} + aux (A) or {b_ref} + aux (B).
enum class Side { A, B };
std::vector<RealImage> side_channels(const InputSets& in, Side side);

template <typename S>
struct ForwardPass {
  Tape<S> tape;
  int output = -1;
  std::uint64_t version = 0;
  int pad_H = 0;  // padded extent seen by the network
  int pad_W = 0;
  RealImage w;    // log-output, cropped to the input extent
};

/// Runs f_theta on `channels` (raw, un-normalized). Inputs whose extent is not
/// a multiple of 2^depth are mirror-padded and the output is cropped.
template <typename S>
ForwardPass<S> forward(const EstimatorParams& params, std::span<const RealImage> channels);

/// Gradients of sum(upstream * w) with respect to every trainable tensor.
/// Throws StaleTape if the tape was already swept or params changed since.
template <typename S>
std::vector<std::vector<double>> backward(const EstimatorParams& params, ForwardPass<S>& pass,
                                          const RealImage& upstream);

/// (e^{f(A)} + e^{f(B)}) / 2 for the reference date of `wstack`.
RealImage despeckle(const EstimatorParams& params, const WhitenedStack& wstack);
RealImage despeckle(const EstimatorParams& params, const InputSets& inputs);

}  // namespace mtmerlin
