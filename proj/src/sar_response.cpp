#include "mtmerlin/sar_response.hpp"

#include <cmath>
#include <numbers>

#include "mtmerlin/error.hpp"
#include "mtmerlin/fft.hpp"

#include <Eigen/Dense>

namespace mtmerlin {

void validate_ramp(const PhaseRamp& ramp) {
  if (!(std::abs(ramp.fx) <= 0.5 && std::abs(ramp.fy) <= 0.5) || !std::isfinite(ramp.phase0)) {
    throw Error(ErrorCode::InvalidArgument, "ramp frequencies must lie in [-0.5, 0.5] cycles/pixel");
  }
}

void apply_ramp(ComplexPlane& img, const PhaseRamp& ramp, double sign, double scale_y, double scale_x) {
  const double two_pi = 2.0 * std::numbers::pi;
  for (int y = 0; y < img.H; ++y) {
    for (int x = 0; x < img.W; ++x) {
      const double phase = two_pi * (ramp.fx * x * scale_x + ramp.fy * y * scale_y) + ramp.phase0;
      img(y, x) *= std::polar(1.0, sign * phase);
    }
  }
}

double window_gain(const Apodization& w, double f) {
  if (w.type == WindowType::Rectangular) return 1.0;
  return w.alpha + (1.0 - w.alpha) * std::cos(2.0 * std::numbers::pi * f);
}

namespace {

int scaled_extent(int n, const Oversampling& os) {
  const long long num = static_cast<long long>(n) * os.num;
  if (num % os.den != 0) {
    throw Error(ErrorCode::InvalidArgument, "oversampling factor must map the extent to an integer");
  }
  return static_cast<int>(num / os.den);
}

// One input bin of the 1D spectral map lands in at most two output bins (the
// Nyquist bin of an even-length input is split between both ends).
struct BinRoute {
  int dest[2];
  double gain[2];
  int count;
};

std::vector<BinRoute> axis_routes(const SarResponseSpec& spec, int n_in, int n_out, double normalization) {
  std::vector<BinRoute> routes(n_in);
  for (int k = 0; k < n_in; ++k) {
    const int s = (2 * k >= n_in) ? k - n_in : k;
    const double g = window_gain(spec.apodization, static_cast<double>(s) / n_in) * normalization;
    BinRoute r{};
    if (n_out > n_in && n_in % 2 == 0 && 2 * s == -n_in) {
      r.count = 2;
      r.dest[0] = ((s % n_out) + n_out) % n_out;
      r.dest[1] = -s;
      r.gain[0] = r.gain[1] = 0.5 * g;
    } else {
      r.count = 1;
      r.dest[0] = ((s % n_out) + n_out) % n_out;
      r.gain[0] = g;
    }
    routes[k] = r;
  }
  return routes;
}

std::vector<cplx> apply_axis(std::span<const cplx> x, const std::vector<BinRoute>& routes, int n_out) {
  const std::vector<cplx> spec_in = dft1_forward(x);
  std::vector<cplx> spec_out(n_out);
  for (std::size_t k = 0; k < routes.size(); ++k) {
    for (int i = 0; i < routes[k].count; ++i) spec_out[routes[k].dest[i]] += routes[k].gain[i] * spec_in[k];
  }
  return dft1_inverse(spec_out);
}

// Gain that gives Q unit row energy along one axis.
double axis_normalization(const SarResponseSpec& spec, int n_in, int n_out) {
  const auto routes = axis_routes(spec, n_in, n_out, 1.0);
  // Row 0 of Q: response at output 0 to each input impulse.
  double energy = 0.0;
  std::vector<cplx> e(n_in);
  for (int n = 0; n < n_in; ++n) {
    std::fill(e.begin(), e.end(), cplx{});
    e[n] = 1.0;
    energy += std::norm(apply_axis(e, routes, n_out)[0]);
  }
  return 1.0 / std::sqrt(energy);
}

}  // namespace

int SarResponseSpec::output_rows(int H) const {
  return mode == Mode::Identity ? H : scaled_extent(H, oversample_y);
}
int SarResponseSpec::output_cols(int W) const {
  return mode == Mode::Identity ? W : scaled_extent(W, oversample_x);
}
double SarResponseSpec::factor_y() const {
  return mode == Mode::Identity ? 1.0 : static_cast<double>(oversample_y.num) / oversample_y.den;
}
double SarResponseSpec::factor_x() const {
  return mode == Mode::Identity ? 1.0 : static_cast<double>(oversample_x.num) / oversample_x.den;
}

void validate(const SarResponseSpec& spec, int H, int W) {
  if (spec.mode == SarResponseSpec::Mode::Identity) return;
  for (const Oversampling* os : {&spec.oversample_y, &spec.oversample_x}) {
    if (os->num < 1 || os->den < 1 || os->num < os->den) {
      throw Error(ErrorCode::InvalidArgument, "oversampling factor must be a rational >= 1");
    }
  }
  (void)spec.output_rows(H);
  (void)spec.output_cols(W);
  if (spec.apodization.type == WindowType::RaisedCosine &&
      !(spec.apodization.alpha >= 0.5 && spec.apodization.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "raised-cosine taper must lie in [0.5, 1]");
  }
}

std::vector<double> response_axis_matrix(const SarResponseSpec& spec, int n_in, bool vertical) {
  const int n_out = vertical ? spec.output_rows(n_in) : spec.output_cols(n_in);
  std::vector<double> q(static_cast<std::size_t>(n_out) * n_in, 0.0);
  if (spec.mode == SarResponseSpec::Mode::Identity) {
    for (int i = 0; i < n_in; ++i) q[static_cast<std::size_t>(i) * n_in + i] = 1.0;
    return q;
  }
  const auto routes = axis_routes(spec, n_in, n_out, axis_normalization(spec, n_in, n_out));
  std::vector<cplx> e(n_in);
  for (int n = 0; n < n_in; ++n) {
    std::fill(e.begin(), e.end(), cplx{});
    e[n] = 1.0;
    const auto col = apply_axis(e, routes, n_out);
    for (int m = 0; m < n_out; ++m) q[static_cast<std::size_t>(m) * n_in + n] = col[m].real();
  }
  return q;
}

ComplexPlane apply_q(const ComplexPlane& img, const SarResponseSpec& spec) {
  if (spec.mode == SarResponseSpec::Mode::Identity) return img;
  validate(spec, img.H, img.W);
  const int Ho = spec.output_rows(img.H);
  const int Wo = spec.output_cols(img.W);
  const auto ry = axis_routes(spec, img.H, Ho, axis_normalization(spec, img.H, Ho));
  const auto rx = axis_routes(spec, img.W, Wo, axis_normalization(spec, img.W, Wo));
  const ComplexPlane in = dft2_forward(img);
  ComplexPlane out(Ho, Wo);
  // A unitary 2D DFT factors into unitary 1D DFTs, so the 1D gains apply as-is.
  for (int ky = 0; ky < img.H; ++ky) {
    for (int kx = 0; kx < img.W; ++kx) {
      const cplx v = in(ky, kx);
      for (int i = 0; i < ry[ky].count; ++i) {
        for (int j = 0; j < rx[kx].count; ++j) {
          out(ry[ky].dest[i], rx[kx].dest[j]) += ry[ky].gain[i] * rx[kx].gain[j] * v;
        }
      }
    }
  }
  return dft2_inverse(out);
}

ComplexStack apply_sar_response(const ComplexStack& z, const std::vector<RealImage>& phi,
                                const std::vector<PhaseRamp>& psi, const SarResponseSpec& spec) {
  validate(spec, z.H(), z.W());
  if (!phi.empty() && static_cast<int>(phi.size()) != z.T()) {
    throw Error(ErrorCode::ShapeMismatch, "phi needs one map per date");
  }
  if (!psi.empty() && static_cast<int>(psi.size()) != z.T()) {
    throw Error(ErrorCode::ShapeMismatch, "psi needs one ramp per date");
  }
  const int Ho = spec.output_rows(z.H());
  const int Wo = spec.output_cols(z.W());
  ComplexStack out(z.T(), Ho, Wo, Layout::DateMajor, z.dtype());
  for (int t = 0; t < z.T(); ++t) {
    ComplexPlane p = z.plane(t);
    if (!phi.empty()) {
      if (phi[t].H != p.H || phi[t].W != p.W) throw Error(ErrorCode::ShapeMismatch, "phi shape differs from stack");
      for (std::size_t k = 0; k < p.size(); ++k) p.data[k] *= std::polar(1.0, phi[t].data[k]);
    }
    if (spec.mode != SarResponseSpec::Mode::Identity) {
      if (!psi.empty()) {
        validate_ramp(psi[t]);
        apply_ramp(p, psi[t], +1.0);
      }
      p = apply_q(p, spec);
      if (!psi.empty()) apply_ramp(p, psi[t], -1.0, 1.0 / spec.factor_y(), 1.0 / spec.factor_x());
    }
    out.set_plane(t, p);
  }
  return permute_layout(out, z.layout());
}

RealImage lowpass_reflectivity(const RealImage& r, const SarResponseSpec& spec) {
  if (spec.mode == SarResponseSpec::Mode::Identity) return r;
  validate(spec, r.H, r.W);
  const int Ho = spec.output_rows(r.H);
  const int Wo = spec.output_cols(r.W);
  auto qy = response_axis_matrix(spec, r.H, true);
  auto qx = response_axis_matrix(spec, r.W, false);
  for (auto& v : qy) v *= v;
  for (auto& v : qx) v *= v;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Mat> Qy(qy.data(), Ho, r.H);
  const Eigen::Map<const Mat> Qx(qx.data(), Wo, r.W);
  const Eigen::Map<const Mat> R(r.data.data(), r.H, r.W);
  RealImage out(Ho, Wo);
  Eigen::Map<Mat>(out.data.data(), Ho, Wo) = Qy * R * Qx.transpose();
  return out;
}

}  // namespace mtmerlin
