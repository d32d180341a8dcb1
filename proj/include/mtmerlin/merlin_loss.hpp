#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mtmerlin/preprocess.hpp"
#include "mtmerlin/stack.hpp"

namespace mtmerlin {

/// How the non-reference dates are presented to the estimator.
enum class AuxEncoding : std::uint8_t {
  LogIntensity = 0,  // one channel per date: log(|z_t|^2 + kLogEpsilon)
  ReIm = 1,          // two channels per date: Re z_t, Im z_t
};

inline constexpr double kLogEpsilon = 1e-10;

int aux_channels_per_date(AuxEncoding enc);

/// The two estimator input sets of the reference date.
///
/// Set A is {a_ref} + aux and is supervised by b_ref; set B is {b_ref} + aux and
/// is supervised by a_ref. aux depends only on the non-reference dates.
struct InputSets {
  RealImage a_ref;
  RealImage b_ref;
  std::vector<RealImage> aux;
  int ref_index = 0;
  AuxEncoding encoding = AuxEncoding::LogIntensity;

  int H() const { return a_ref.H; }
  int W() const { return a_ref.W; }
  int channels() const { return 1 + static_cast<int>(aux.size()); }
};

InputSets build_input_sets(const WhitenedStack& wstack, AuxEncoding encoding = AuxEncoding::LogIntensity);

struct LossValue {
  double total = 0.0;
  std::optional<RealImage> per_pixel;
};

/// sum_k 0.5 w(k) + target(k)^2 exp(-w(k)), i.e. the MERLIN loss with u = e^w.
/// Throws NonFinite on overflow.
LossValue merlin_loss(const RealImage& target, const RealImage& w, bool keep_per_pixel = false);

/// d/dw(k) = 0.5 - target(k)^2 exp(-w(k)).
RealImage merlin_loss_grad(const RealImage& target, const RealImage& w);

/// Minimizers of the expected loss for given low-pass reflectivity and
/// scatterer: u* = r~ + 2 Im(d)^2 (input set A), v* = r~ + 2 Re(d)^2 (set B).
std::pair<RealImage, RealImage> optimal_outputs(const RealImage& r_tilde_ref, const ComplexPlane& d_hat_ref);

/// Pixelwise (u + v) / 2.
RealImage combine_estimates(const RealImage& u, const RealImage& v);

}  // namespace mtmerlin
