#include "mtmerlin/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mtmerlin/error.hpp"
#include "mtmerlin/fft.hpp"

namespace mtmerlin {

namespace {

double circular_centroid(const std::vector<double>& power, double total, double flat_threshold) {
  const int n = static_cast<int>(power.size());
  cplx moment{};
  for (int k = 0; k < n; ++k) moment += power[k] * std::polar(1.0, 2.0 * std::numbers::pi * k / n);
  if (std::abs(moment) < flat_threshold * total) return 0.0;
  double f = std::arg(moment) / (2.0 * std::numbers::pi);
  if (f <= -0.5) f += 1.0;
  return f;
}

void require_same_shape(const ComplexPlane& a, const ComplexPlane& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, what);
}

// Inclusive 2D prefix sums with a zero border row/column.
template <typename V>
struct Integral {
  int H, W;
  std::vector<V> s;

  template <typename F>
  Integral(int h, int w, F value) : H(h), W(w), s(static_cast<std::size_t>(h + 1) * (w + 1), V{}) {
    for (int y = 0; y < H; ++y) {
      V row{};
      for (int x = 0; x < W; ++x) {
        row += value(y * W + x);
        at(y + 1, x + 1) = at(y, x + 1) + row;
      }
    }
  }
  V& at(int y, int x) { return s[static_cast<std::size_t>(y) * (W + 1) + x]; }
  V box(int y0, int x0, int y1, int x1) const {  // [y0, y1) x [x0, x1)
    auto g = [&](int y, int x) { return s[static_cast<std::size_t>(y) * (W + 1) + x]; };
    return g(y1, x1) - g(y0, x1) - g(y1, x0) + g(y0, x0);
  }
};

}  // namespace

SpectralShift estimate_spectral_shift(const ComplexPlane& img) {
  if (img.H < 8 || img.W < 8) throw Error(ErrorCode::InvalidArgument, "spectral shift needs H, W >= 8");
  const ComplexPlane spec = dft2_forward(img);
  std::vector<double> px(img.W, 0.0), py(img.H, 0.0);
  double total = 0.0;
  for (int y = 0; y < img.H; ++y) {
    for (int x = 0; x < img.W; ++x) {
      const double p = std::norm(spec(y, x));
      px[x] += p;
      py[y] += p;
      total += p;
    }
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateSpectrum, "image has zero power");
  const double flat = 4.0 / std::sqrt(static_cast<double>(img.H) * img.W);
  return SpectralShift{circular_centroid(px, total, flat), circular_centroid(py, total, flat), 0.0};
}

ComplexStack recenter_spectrum(const ComplexStack& stack, const SpectralShift& shift) {
  validate_ramp(shift);
  ComplexStack out = stack;
  if (shift == SpectralShift{}) return out;
  for (int t = 0; t < stack.T(); ++t) {
    ComplexPlane p = stack.plane(t);
    apply_ramp(p, shift, -1.0);
    out.set_plane(t, p);
  }
  return out;
}

ComplexPlane detect_dominant_scatterers(const ComplexPlane& img, double quantile) {
  if (!(quantile > 0.0 && quantile < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile must lie in (0, 1)");
  ComplexPlane out(img.H, img.W);
  const RealImage I = intensity(img);
  std::vector<double> sorted = I.data;
  const std::size_t q_index = static_cast<std::size_t>(std::floor(quantile * (sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + q_index, sorted.end());
  const double threshold = sorted[q_index];
  for (int y = 0; y < img.H; ++y) {
    for (int x = 0; x < img.W; ++x) {
      const double v = I(y, x);
      if (!(v > threshold)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= img.H || xx < 0 || xx >= img.W) continue;
          if (I(yy, xx) >= v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out(y, x) = img(y, x);
    }
  }
  return out;
}

CoherenceMaps estimate_coherence_pair(const ComplexPlane& z_i, const ComplexPlane& z_ref, const ComplexPlane& d_i,
                                      const ComplexPlane& d_ref, int window) {
  if (window < 3 || window % 2 == 0) throw Error(ErrorCode::InvalidArgument, "coherence window must be odd and >= 3");
  require_same_shape(z_i, z_ref, "coherence pair shapes differ");
  require_same_shape(z_i, d_i, "scatterer map shape differs");
  require_same_shape(z_ref, d_ref, "scatterer map shape differs");
  const int H = z_i.H, W = z_i.W;
  auto bi = [&](int k) { return z_i.data[k] - d_i.data[k]; };
  auto br = [&](int k) { return z_ref.data[k] - d_ref.data[k]; };
  const Integral<cplx> cross(H, W, [&](int k) { return br(k) * std::conj(bi(k)); });
  const Integral<double> pow_i(H, W, [&](int k) { return std::norm(bi(k)); });
  const Integral<double> pow_r(H, W, [&](int k) { return std::norm(br(k)); });

  CoherenceMaps m{ComplexPlane(H, W), RealImage(H, W), RealImage(H, W)};
  const int half = window / 2;
  constexpr double kFloor = 1e-300;
  for (int y = 0; y < H; ++y) {
    const int y0 = std::max(0, y - half), y1 = std::min(H, y + half + 1);
    for (int x = 0; x < W; ++x) {
      const int x0 = std::max(0, x - half), x1 = std::min(W, x + half + 1);
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      const cplx c = cross.box(y0, x0, y1, x1);
      const double si = pow_i.box(y0, x0, y1, x1);
      const double sr = pow_r.box(y0, x0, y1, x1);
      const double denom = std::sqrt(si * sr);
      cplx g = denom > 0.0 ? c / denom : cplx{};
      // Round-off can push |gamma| marginally above 1.
      if (std::abs(g) > 1.0) g /= std::abs(g);
      m.gamma(y, x) = g;
      m.r_i(y, x) = std::max(si / n, kFloor);
      m.r_ref(y, x) = std::max(sr / n, kFloor);
    }
  }
  return m;
}

WhitenedPair whiten_pair(const ComplexPlane& z_i, const ComplexPlane& z_ref, const ComplexPlane& d_i,
                         const ComplexPlane& d_ref, const CoherenceMaps& maps, double guard) {
  require_same_shape(z_i, z_ref, "whitening pair shapes differ");
  require_same_shape(z_i, d_i, "scatterer map shape differs");
  require_same_shape(z_ref, d_ref, "scatterer map shape differs");
  require_same_shape(z_i, maps.gamma, "coherence map shape differs");
  if (!(guard > 0.0 && guard < 1.0)) throw Error(ErrorCode::InvalidArgument, "coherence guard must lie in (0, 1)");
  WhitenedPair out{ComplexPlane(z_i.H, z_i.W), 0};
  const double max_mod = 1.0 - guard;
  for (std::size_t k = 0; k < z_i.size(); ++k) {
    cplx g = maps.gamma.data[k];
    const double mod = std::abs(g);
    if (mod >= max_mod) {
      g *= max_mod / mod;
      ++out.saturated;
    }
    if (mod == 0.0) {
      out.z_i.data[k] = z_i.data[k];
      continue;
    }
    const double tau = 1.0 / std::sqrt(1.0 - std::norm(g));
    const double ratio = std::sqrt(maps.r_i.data[k] / maps.r_ref.data[k]);
    out.z_i.data[k] = tau * z_i.data[k] + (1.0 - tau) * d_i.data[k] -
                      ratio * tau * std::conj(g) * (z_ref.data[k] - d_ref.data[k]);
  }
  return out;
}

WhitenedStack as_whitened(const ComplexStack& stack, int ref_index) {
  if (ref_index < 0 || ref_index >= stack.T()) throw Error(ErrorCode::InvalidArgument, "reference date out of range");
  WhitenedStack w;
  w.data = stack;
  w.ref_index = ref_index;
  w.maps.resize(stack.T());
  for (int t = 0; t < stack.T(); ++t) w.scatterers.emplace_back(stack.H(), stack.W());
  return w;
}

WhitenedStack whiten_stack(const ComplexStack& centered, int ref_index, const WhitenParams& params,
                           const StageLogger& log) {
  WhitenedStack w = as_whitened(centered, ref_index);
  if (!params.enabled) return w;
  const int T = centered.T();
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "whitening needs at least two dates");
  auto note = [&](std::string_view stage, const std::string& detail) {
    if (log) log(stage, detail);
  };

  std::vector<ComplexPlane> planes;
  for (int t = 0; t < T; ++t) planes.push_back(centered.plane(t));

  if (!params.external_scatterers.empty()) {
    if (static_cast<int>(params.external_scatterers.size()) != T) {
      throw Error(ErrorCode::ShapeMismatch, "need one external scatterer map per date");
    }
    for (int t = 0; t < T; ++t) require_same_shape(params.external_scatterers[t], planes[t], "scatterer map shape differs");
    w.scatterers = params.external_scatterers;
    note("detect", "source=external");
  } else if (params.ds_quantile < 1.0) {
    int count = 0;
    for (int t = 0; t < T; ++t) {
      w.scatterers[t] = detect_dominant_scatterers(planes[t], params.ds_quantile);
      for (const cplx& v : w.scatterers[t].data) count += (v != cplx{});
    }
    note("detect", "quantile=" + std::to_string(params.ds_quantile) + " scatterers=" + std::to_string(count));
  } else {
    note("detect", "disabled");
  }

  for (int t = 0; t < T; ++t) {
    if (t == ref_index) continue;
    w.maps[t] = estimate_coherence_pair(planes[t], planes[ref_index], w.scatterers[t], w.scatterers[ref_index],
                                        params.coherence_window);
  }
  note("interfere", "window=" + std::to_string(params.coherence_window) + " pairs=" + std::to_string(T - 1));

  for (int t = 0; t < T; ++t) {
    if (t == ref_index) continue;
    WhitenedPair p = whiten_pair(planes[t], planes[ref_index], w.scatterers[t], w.scatterers[ref_index], w.maps[t],
                                 params.guard);
    w.saturated += p.saturated;
    w.data.set_plane(t, p.z_i);
  }
  note("whiten", "saturated=" + std::to_string(w.saturated));
  // Scatterers are reinserted by the (1 - tau) d term of the pair transform.
  note("reinsert", "dates=" + std::to_string(T - 1));
  w.whitened = true;
  return w;
}

}  // namespace mtmerlin
