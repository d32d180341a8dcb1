#include "mtmerlin/merlin_loss.hpp"

#include <cmath>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

int aux_channels_per_date(AuxEncoding enc) { return enc == AuxEncoding::ReIm ? 2 : 1; }

InputSets build_input_sets(const WhitenedStack& wstack, AuxEncoding encoding) {
  const ComplexStack& s = wstack.data;
  if (wstack.ref_index < 0 || wstack.ref_index >= s.T()) {
    throw Error(ErrorCode::InvalidArgument, "reference date out of range");
  }
  InputSets in;
  in.ref_index = wstack.ref_index;
  in.encoding = encoding;
  auto [a, b] = split_reim(s.plane(wstack.ref_index));
  in.a_ref = std::move(a);
  in.b_ref = std::move(b);
  for (int t = 0; t < s.T(); ++t) {
    if (t == wstack.ref_index) continue;
    const ComplexPlane p = s.plane(t);
    if (encoding == AuxEncoding::LogIntensity) {
      RealImage ch(p.H, p.W);
      for (std::size_t k = 0; k < p.size(); ++k) ch.data[k] = std::log(std::norm(p.data[k]) + kLogEpsilon);
      in.aux.push_back(std::move(ch));
    } else {
      auto [re, im] = split_reim(p);
      in.aux.push_back(std::move(re));
      in.aux.push_back(std::move(im));
    }
  }
  return in;
}

LossValue merlin_loss(const RealImage& target, const RealImage& w, bool keep_per_pixel) {
  if (!target.same_shape(w)) throw Error(ErrorCode::ShapeMismatch, "loss target and output shapes differ");
  LossValue out;
  if (keep_per_pixel) out.per_pixel = RealImage(w.H, w.W);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double a = target.data[k];
    const double term = 0.5 * w.data[k] + a * a * std::exp(-w.data[k]);
    if (!std::isfinite(term)) throw Error(ErrorCode::NonFinite, "loss term overflow at pixel " + std::to_string(k));
    out.total += term;
    if (keep_per_pixel) out.per_pixel->data[k] = term;
  }
  return out;
}

RealImage merlin_loss_grad(const RealImage& target, const RealImage& w) {
  if (!target.same_shape(w)) throw Error(ErrorCode::ShapeMismatch, "loss target and output shapes differ");
  RealImage g(w.H, w.W);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double a = target.data[k];
    g.data[k] = 0.5 - a * a * std::exp(-w.data[k]);
  }
  return g;
}

std::pair<RealImage, RealImage> optimal_outputs(const RealImage& r_tilde_ref, const ComplexPlane& d_hat_ref) {
  if (r_tilde_ref.H != d_hat_ref.H || r_tilde_ref.W != d_hat_ref.W) {
    throw Error(ErrorCode::ShapeMismatch, "reflectivity and scatterer shapes differ");
  }
  RealImage u(r_tilde_ref.H, r_tilde_ref.W), v(r_tilde_ref.H, r_tilde_ref.W);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double r = r_tilde_ref.data[k];
    if (!(r > 0.0)) throw Error(ErrorCode::NonPositiveInput, "low-pass reflectivity must be positive");
    const cplx d = d_hat_ref.data[k];
    u.data[k] = r + 2.0 * d.imag() * d.imag();
    v.data[k] = r + 2.0 * d.real() * d.real();
  }
  return {std::move(u), std::move(v)};
}

RealImage combine_estimates(const RealImage& u, const RealImage& v) {
  if (!u.same_shape(v)) throw Error(ErrorCode::ShapeMismatch, "estimate shapes differ");
  RealImage out(u.H, u.W);
  for (std::size_t k = 0; k < u.size(); ++k) out.data[k] = 0.5 * (u.data[k] + v.data[k]);
  return out;
}

}  // namespace mtmerlin
