#include "mtmerlin/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtmerlin/error.hpp"
#include "mtmerlin/fft.hpp"
#include "mtmerlin/parallel.hpp"

namespace mtmerlin {

void validate(const SceneModel& scene) {
  const int T = scene.T();
  if (T < 1) throw Error(ErrorCode::InvalidArgument, "scene needs at least one date");
  for (const auto& r : scene.r) {
    if (!r.same_shape(scene.r[0])) throw Error(ErrorCode::ShapeMismatch, "reflectivity maps differ in shape");
    for (double v : r.data) {
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "reflectivities must be positive and finite");
    }
  }
  if (!scene.d.empty()) {
    if (static_cast<int>(scene.d.size()) != T) throw Error(ErrorCode::ShapeMismatch, "d needs one map per date");
    for (const auto& d : scene.d) {
      if (d.H != scene.H() || d.W != scene.W()) throw Error(ErrorCode::ShapeMismatch, "d shape differs from r");
      for (const cplx& v : d.data) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw Error(ErrorCode::InvalidArgument, "d must be finite");
      }
    }
  }
  if (!scene.phi.empty() && static_cast<int>(scene.phi.size()) != T) {
    throw Error(ErrorCode::ShapeMismatch, "phi needs one map per date");
  }
  if (!scene.psi.empty()) {
    if (static_cast<int>(scene.psi.size()) != T) throw Error(ErrorCode::ShapeMismatch, "psi needs one ramp per date");
    for (const auto& p : scene.psi) validate_ramp(p);
  }
  const CMatrix g = coherence_matrix(scene.coherence);
  if (g.rows() != T) throw Error(ErrorCode::ShapeMismatch, "coherence matrix size differs from date count");
  validate(scene.sar, scene.H(), scene.W());
}

SpeckleDraw draw_speckle(int T, int H, int W, const RngHandle& rng, int threads) {
  SpeckleDraw out{ComplexStack(T, H, W), rng.seed(), rng.stream_id()};
  const std::uint64_t base_seed = mix64(rng.seed() ^ mix64(rng.stream_id()));
  const double sd = std::sqrt(0.5);
  parallel_for(H * W, threads, [&](int k) {
    RngHandle px(base_seed, static_cast<std::uint64_t>(k));
    for (int t = 0; t < T; ++t) {
      const double re = px.normal();
      const double im = px.normal();
      out.epsilon.at(t, k) = cplx(sd * re, sd * im);
    }
  });
  return out;
}

namespace {

void check_reflectivity_shape(const SpeckleDraw& eps, const std::vector<RealImage>& r) {
  const auto& e = eps.epsilon;
  if (static_cast<int>(r.size()) != e.T()) throw Error(ErrorCode::ShapeMismatch, "need one reflectivity map per date");
  for (const auto& m : r) {
    if (m.H != e.H() || m.W != e.W()) throw Error(ErrorCode::ShapeMismatch, "reflectivity shape differs from speckle");
  }
}

template <typename FactorAt>
ComplexStack correlate(const SpeckleDraw& eps, const std::vector<RealImage>& r, FactorAt factor_at) {
  check_reflectivity_shape(eps, r);
  const auto& e = eps.epsilon;
  const int T = e.T();
  ComplexStack s(T, e.H(), e.W());
  std::vector<cplx> col(T);
  for (int k = 0; k < e.pixels(); ++k) {
    const CMatrix& L = factor_at(k);
    for (int t = 0; t < T; ++t) col[t] = e.at(t, k);
    for (int t = 0; t < T; ++t) {
      cplx acc{};
      for (int j = 0; j <= t; ++j) acc += L(t, j) * col[j];
      s.at(t, k) = std::sqrt(r[t].data[k]) * acc;
    }
  }
  return s;
}

}  // namespace

ComplexStack correlate_speckle(const SpeckleDraw& eps, const CMatrix& L, const std::vector<RealImage>& r) {
  if (L.rows() != eps.epsilon.T() || L.cols() != eps.epsilon.T()) {
    throw Error(ErrorCode::ShapeMismatch, "factor size differs from date count");
  }
  return correlate(eps, r, [&](int) -> const CMatrix& { return L; });
}

ComplexStack correlate_speckle(const SpeckleDraw& eps, const std::vector<CMatrix>& L,
                               const std::vector<RealImage>& r) {
  if (static_cast<int>(L.size()) != eps.epsilon.pixels()) {
    throw Error(ErrorCode::ShapeMismatch, "need one factor per pixel");
  }
  for (const auto& m : L) {
    if (m.rows() != eps.epsilon.T() || m.cols() != eps.epsilon.T()) {
      throw Error(ErrorCode::ShapeMismatch, "factor size differs from date count");
    }
  }
  return correlate(eps, r, [&](int k) -> const CMatrix& { return L[k]; });
}

SynthesisResult synthesize_stack(const SceneModel& scene, const RngHandle& rng, int threads) {
  validate(scene);
  const int T = scene.T(), H = scene.H(), W = scene.W();
  const CMatrix L = cholesky_psd(coherence_matrix(scene.coherence));

  const SpeckleDraw eps = draw_speckle(T, H, W, rng, threads);
  ComplexStack z = correlate_speckle(eps, L, scene.r);
  ComplexStack d(T, H, W);
  if (!scene.d.empty()) {
    for (int t = 0; t < T; ++t) d.set_plane(t, scene.d[t]);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < H * W; ++k) z.at(t, k) += d.at(t, k);
    }
  }

  SynthesisResult out;
  out.z = apply_sar_response(z, scene.phi, scene.psi, scene.sar);
  const ComplexStack d_tilde = apply_sar_response(d, scene.phi, scene.psi, scene.sar);
  for (int t = 0; t < T; ++t) {
    out.r_tilde.push_back(lowpass_reflectivity(scene.r[t], scene.sar));
    out.d_tilde.push_back(d_tilde.plane(t));
    out.d_tilde_intensity.push_back(intensity(out.d_tilde.back()));
  }
  return out;
}

std::vector<RealImage> make_piecewise_scene(const PiecewiseSceneSpec& spec, const RngHandle& rng) {
  if (spec.H < 1 || spec.W < 1 || spec.T < 1 || spec.class_levels.empty() || spec.cell_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid piecewise scene spec");
  }
  for (double v : spec.class_levels) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "class levels must be positive");
  }
  RngHandle g = rng;
  const int n_classes = static_cast<int>(spec.class_levels.size());
  const int n_cells = std::max(1, (spec.H * spec.W) / (spec.cell_size * spec.cell_size));
  std::vector<double> cy(n_cells), cx(n_cells);
  for (int c = 0; c < n_cells; ++c) {
    cy[c] = g.uniform() * spec.H;
    cx[c] = g.uniform() * spec.W;
  }
  std::vector<int> cell_of(static_cast<std::size_t>(spec.H) * spec.W);
  std::vector<int> cell_area(n_cells, 0);
  for (int y = 0; y < spec.H; ++y) {
    for (int x = 0; x < spec.W; ++x) {
      int best = 0;
      double best_d = 1e300;
      for (int c = 0; c < n_cells; ++c) {
        const double dy = y + 0.5 - cy[c], dx = x + 0.5 - cx[c];
        const double dist = dy * dy + dx * dx;
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      cell_of[static_cast<std::size_t>(y) * spec.W + x] = best;
      ++cell_area[best];
    }
  }
  std::vector<int> base(n_cells);
  for (auto& b : base) b = static_cast<int>(g.below(n_classes));

  std::vector<RealImage> maps;
  const double target_area = spec.change_fraction * spec.H * spec.W;
  for (int t = 0; t < spec.T; ++t) {
    std::vector<int> label = base;
    if (t > 0 && n_classes > 1 && spec.change_fraction > 0.0) {
      std::vector<int> order(n_cells);
      std::iota(order.begin(), order.end(), 0);
      for (int i = n_cells - 1; i > 0; --i) std::swap(order[i], order[g.below(i + 1)]);
      double changed = 0.0;
      for (int c : order) {
        if (changed >= target_area) break;
        label[c] = (base[c] + 1 + static_cast<int>(g.below(n_classes - 1))) % n_classes;
        changed += cell_area[c];
      }
    }
    RealImage m(spec.H, spec.W);
    for (std::size_t k = 0; k < m.size(); ++k) m.data[k] = spec.class_levels[label[cell_of[k]]];
    maps.push_back(std::move(m));
  }
  return maps;
}

RealImage random_smooth_field(int H, int W, double amplitude, double correlation_length, const RngHandle& rng) {
  RngHandle g = rng;
  ComplexPlane noise(H, W);
  for (auto& v : noise.data) v = g.normal();
  ComplexPlane spec = dft2_forward(noise);
  for (int ky = 0; ky < H; ++ky) {
    for (int kx = 0; kx < W; ++kx) {
      const double fy = bin_frequency(ky, H), fx = bin_frequency(kx, W);
      const double s = correlation_length * 2.0 * 3.141592653589793;
      spec(ky, kx) *= std::exp(-0.5 * s * s * (fx * fx + fy * fy));
    }
  }
  const ComplexPlane smooth = dft2_inverse(spec);
  RealImage out(H, W);
  double sumsq = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.data[k] = smooth.data[k].real();
    sumsq += out.data[k] * out.data[k];
  }
  const double rms = std::sqrt(sumsq / out.size());
  if (rms > 0.0) {
    for (auto& v : out.data) v *= amplitude / rms;
  }
  return out;
}

}  // namespace mtmerlin
