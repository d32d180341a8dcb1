#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "mtmerlin/coherence.hpp"
#include "mtmerlin/error.hpp"
#include "mtmerlin/preprocess.hpp"
#include "mtmerlin/scene_sim.hpp"
#include "test_support.hpp"

using namespace mtmerlin;

namespace {

SynthesisResult simulate(int T, int H, int W, const CoherenceSpec& coh, std::uint64_t seed,
                         SarResponseSpec sar = {}, std::vector<PhaseRamp> psi = {}) {
  SceneModel scene;
  scene.r.assign(T, RealImage(H, W, 1.0));
  scene.coherence = coh;
  scene.sar = sar;
  scene.psi = std::move(psi);
  return synthesize_stack(scene, RngHandle(seed));
}

CMatrix pair_gamma(double g) {
  CMatrix m(2, 2);
  m << 1, g, g, 1;
  return m;
}

SarResponseSpec apodized() {
  SarResponseSpec s;
  s.mode = SarResponseSpec::Mode::ApodizedOversampled;
  return s;
}

CoherenceMaps oracle_maps(int H, int W, cplx gamma) {
  return CoherenceMaps{ComplexPlane(H, W, gamma), RealImage(H, W, 1.0), RealImage(H, W, 1.0)};
}

}  // namespace

TEST_CASE("spectral shift estimate") {
  SUBCASE("centered white spectrum") {
    const auto res = simulate(1, 64, 64, ExponentialCoherence{{0.0}, 0.0}, 4);
    const SpectralShift s = estimate_spectral_shift(res.z.plane(0));
    CHECK(std::abs(s.fx) <= 0.01);
    CHECK(std::abs(s.fy) <= 0.01);
  }
  SUBCASE("ramp e^{j 2 pi 0.2 x} on an apodized image") {
    const auto res = simulate(1, 64, 64, ExponentialCoherence{{0.0}, 0.0}, 5, apodized());
    ComplexPlane p = res.z.plane(0);
    const SpectralShift base = estimate_spectral_shift(p);
    CHECK(std::abs(base.fx) <= 0.01);
    CHECK(std::abs(base.fy) <= 0.01);
    apply_ramp(p, PhaseRamp{0.2, 0.0, 0.0}, +1.0);
    const SpectralShift s = estimate_spectral_shift(p);
    CHECK(std::abs(s.fx - 0.2) <= 0.01);
    CHECK(std::abs(s.fy) <= 0.01);
  }
  SUBCASE("equivariance modulo 1") {
    const auto res = simulate(1, 32, 48, ExponentialCoherence{{0.0}, 0.0}, 6, apodized());
    const ComplexPlane p = res.z.plane(0);
    const SpectralShift s0 = estimate_spectral_shift(p);
    for (double d : {0.125, 0.375, -0.25}) {  // whole DFT bins on both axes
      ComplexPlane q = p;
      apply_ramp(q, PhaseRamp{d, -d / 2, 0.0}, +1.0);
      const SpectralShift s = estimate_spectral_shift(q);
      auto wrap = [](double v) { return v - std::round(v); };
      CHECK(std::abs(wrap(s.fx - s0.fx - d)) < 1e-9);
      CHECK(std::abs(wrap(s.fy - s0.fy + d / 2)) < 1e-9);
    }
  }
  SUBCASE("constant image") {
    const SpectralShift s = estimate_spectral_shift(ComplexPlane(16, 16, cplx(2.0, 1.0)));
    CHECK(s.fx == 0.0);
    CHECK(s.fy == 0.0);
  }
  SUBCASE("errors") {
    try {
      estimate_spectral_shift(ComplexPlane(16, 16));
      FAIL("zero image accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateSpectrum);
    }
    CHECK_THROWS_AS(estimate_spectral_shift(ComplexPlane(4, 16, 1.0)), Error);
  }
}

TEST_CASE("recenter_spectrum") {
  const auto res = simulate(3, 16, 16, ExponentialCoherence{{0, 1, 2}, 1.0}, 7);
  CHECK(recenter_spectrum(res.z, SpectralShift{}) == res.z);
  const SpectralShift shift{0.13, -0.21, 0.7};
  const ComplexStack c = recenter_spectrum(res.z, shift);
  double worst = 0.0;
  for (std::size_t i = 0; i < c.data().size(); ++i) {
    const double a = std::abs(c.data()[i]), b = std::abs(res.z.data()[i]);
    worst = std::max(worst, std::abs(a - b) / b);
  }
  // Phase-only: moduli agree to the last few ulps of the product.
  CHECK(worst <= 4e-16);
  // Applying the opposite ramp restores the input.
  ComplexStack back = c;
  for (int t = 0; t < 3; ++t) {
    ComplexPlane p = c.plane(t);
    apply_ramp(p, shift, +1.0);
    back.set_plane(t, p);
  }
  double err = 0.0;
  for (std::size_t i = 0; i < back.data().size(); ++i) err = std::max(err, std::abs(back.data()[i] - res.z.data()[i]));
  CHECK(err <= 1e-12);
  // Same ramp on every date: relative phase between dates is unchanged.
  for (int k = 0; k < 256; ++k) {
    const cplx before = res.z.at(0, k) * std::conj(res.z.at(2, k));
    const cplx after = c.at(0, k) * std::conj(c.at(2, k));
    CHECK(std::abs(before - after) < 1e-12);
  }
}

TEST_CASE("dominant scatterer detection") {
  for (const cplx& v : detect_dominant_scatterers(ComplexPlane(16, 16, cplx(1, 1)), 0.999).data) CHECK(v == cplx{});
  const ComplexPlane zeros(16, 16);
  for (const cplx& v : detect_dominant_scatterers(zeros, 0.5).data) CHECK(v == cplx{});

  ComplexPlane img(64, 64, std::polar(1.0, 0.3));
  img(10, 20) = cplx(6.0, 8.0);  // intensity 100 over a unit background
  const ComplexPlane d = detect_dominant_scatterers(img, 0.999);
  int count = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (d(y, x) != cplx{}) {
        ++count;
        CHECK(y == 10);
        CHECK(x == 20);
        CHECK(d(y, x) == img(y, x));
      }
    }
  }
  CHECK(count == 1);
  CHECK_THROWS_AS(detect_dominant_scatterers(img, 1.0), Error);
}

TEST_CASE("coherence pair estimate") {
  const int H = 128, W = 128;
  const ComplexPlane zero(H, W);
  SUBCASE("identical images are fully coherent") {
    const ComplexPlane z = testing::random_plane(H, W, 1);
    const CoherenceMaps m = estimate_coherence_pair(z, z, zero, zero, 7);
    for (const cplx& g : m.gamma.data) CHECK(std::abs(std::abs(g) - 1.0) < 1e-12);
    for (double r : m.r_i.data) CHECK(r > 0.0);
  }
  SUBCASE("independent speckle: finite-sample bias only") {
    const auto res = simulate(2, H, W, ExponentialCoherence{{0, 1}, 0.0}, 2);
    const CoherenceMaps m = estimate_coherence_pair(res.z.plane(1), res.z.plane(0), zero, zero, 7);
    double mean = 0.0;
    for (const cplx& g : m.gamma.data) mean += std::abs(g);
    CHECK(mean / (H * W) <= 0.25);
  }
  SUBCASE("true gamma 0.6") {
    const auto res = simulate(2, H, W, ExplicitCoherence{pair_gamma(0.6)}, 3);
    const CoherenceMaps m = estimate_coherence_pair(res.z.plane(1), res.z.plane(0), zero, zero, 7);
    std::vector<double> mod;
    for (const cplx& g : m.gamma.data) mod.push_back(std::abs(g));
    std::nth_element(mod.begin(), mod.begin() + mod.size() / 2, mod.end());
    const double median = mod[mod.size() / 2];
    CHECK(median >= 0.5);
    CHECK(median <= 0.7);
    for (double v : mod) CHECK(v <= 1.0);
  }
  SUBCASE("window must be odd and >= 3") {
    const ComplexPlane z = testing::random_plane(8, 8, 1);
    const ComplexPlane z0(8, 8);
    CHECK_THROWS_AS(estimate_coherence_pair(z, z, z0, z0, 4), Error);
    CHECK_THROWS_AS(estimate_coherence_pair(z, z, z0, z0, 1), Error);
    CHECK_THROWS_AS(estimate_coherence_pair(z, testing::random_plane(8, 9, 1), z0, z0, 3), Error);
  }
}

TEST_CASE("whiten_pair") {
  SUBCASE("hand example") {
    ComplexPlane zi(1, 1, cplx(0.8, 0.0)), zr(1, 1, cplx(1.0, 0.0)), d(1, 1);
    const WhitenedPair p = whiten_pair(zi, zr, d, d, oracle_maps(1, 1, 0.8));
    CHECK(std::abs(p.z_i.data[0]) < 1e-15);
    CHECK(p.saturated == 0);
  }
  SUBCASE("zero coherence is the identity") {
    const ComplexPlane zi = testing::random_plane(8, 8, 4), zr = testing::random_plane(8, 8, 5), d(8, 8);
    CHECK(whiten_pair(zi, zr, d, d, oracle_maps(8, 8, 0.0)).z_i.data == zi.data);
  }
  SUBCASE("oracle maps decorrelate, gamma 0.6") {
    const int H = 400, W = 250;
    const auto res = simulate(2, H, W, ExplicitCoherence{pair_gamma(0.6)}, 9);
    const ComplexPlane zr = res.z.plane(0), zi = res.z.plane(1), d(H, W);
    const ComplexPlane zr_copy = zr;
    const WhitenedPair p = whiten_pair(zi, zr, d, d, oracle_maps(H, W, 0.6));
    CHECK(zr.data == zr_copy.data);
    cplx c{};
    double pi = 0.0, pr = 0.0;
    for (int k = 0; k < H * W; ++k) {
      c += p.z_i.data[k] * std::conj(zr.data[k]);
      pi += std::norm(p.z_i.data[k]);
      pr += std::norm(zr.data[k]);
    }
    const double n = H * W;
    CHECK(std::abs(c / n) <= 0.02);
    CHECK(pi / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(pr / n == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("scatterers pass through the (1 - tau) d term") {
    // With z = d exactly, the background is zero and the output is d.
    ComplexPlane d(2, 2, cplx(3.0, -1.0));
    const WhitenedPair p = whiten_pair(d, d, d, d, oracle_maps(2, 2, 0.5));
    for (const cplx& v : p.z_i.data) CHECK(std::abs(v - cplx(3.0, -1.0)) < 1e-14);
  }
  SUBCASE("saturation clamp") {
    ComplexPlane zi(1, 2, cplx(1.0, 0.0)), zr(1, 2, cplx(1.0, 0.0)), d(1, 2);
    CoherenceMaps m = oracle_maps(1, 2, 1.0);
    m.gamma(0, 1) = 0.5;
    const WhitenedPair p = whiten_pair(zi, zr, d, d, m);
    CHECK(p.saturated == 1);
    const double tau = 1.0 / std::sqrt(1.0 - 0.999 * 0.999);
    CHECK(p.z_i.data[0].real() == doctest::Approx(tau * (1.0 - 0.999)));
    CHECK(std::isfinite(p.z_i.data[0].real()));
  }
}

TEST_CASE("whiten_stack") {
  const int H = 96, W = 96;
  SUBCASE("disabled is bit exact") {
    const auto res = simulate(3, H, W, ExponentialCoherence{{0, 1, 2}, 2.0}, 1);
    WhitenParams wp;
    wp.enabled = false;
    const WhitenedStack w = whiten_stack(res.z, 1, wp);
    CHECK(w.data == res.z);
    CHECK(!w.whitened);
  }
  SUBCASE("T=2 reduces to whiten_pair and logs four stages") {
    const auto res = simulate(2, H, W, ExplicitCoherence{pair_gamma(0.7)}, 2);
    WhitenParams wp;
    wp.ds_quantile = 1.0;
    std::vector<std::string> stages;
    const WhitenedStack w = whiten_stack(res.z, 0, wp, [&](std::string_view s, std::string_view) {
      stages.emplace_back(s);
    });
    CHECK(stages == std::vector<std::string>{"detect", "interfere", "whiten", "reinsert"});
    const ComplexPlane zero(H, W);
    const CoherenceMaps m = estimate_coherence_pair(res.z.plane(1), res.z.plane(0), zero, zero, 7);
    const WhitenedPair p = whiten_pair(res.z.plane(1), res.z.plane(0), zero, zero, m);
    CHECK(w.data.plane(1).data == p.z_i.data);
    CHECK(w.data.plane(0).data == res.z.plane(0).data);
    CHECK(w.whitened);
  }
  SUBCASE("reference plane is untouched for any reference") {
    const auto res = simulate(4, 32, 32, ExponentialCoherence{{0, 1, 2, 3}, 3.0}, 3);
    for (int ref = 0; ref < 4; ++ref) {
      const WhitenedStack w = whiten_stack(res.z, ref, WhitenParams{});
      CHECK(w.data.plane(ref).data == res.z.plane(ref).data);
    }
  }
  SUBCASE("Gamma = I: only estimation noise changes the data") {
    const auto res = simulate(3, 128, 128, ExponentialCoherence{{0, 1, 2}, 0.0}, 4);
    WhitenParams wp;
    wp.coherence_window = 15;
    wp.ds_quantile = 1.0;
    const WhitenedStack w = whiten_stack(res.z, 0, wp);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.data.data().size(); ++i) {
      num += std::norm(w.data.data()[i] - res.z.data()[i]);
      den += std::norm(res.z.data()[i]);
    }
    CHECK(std::sqrt(num / den) <= 0.1);
  }
  SUBCASE("estimated maps decorrelate within 0.05") {
    const auto res = simulate(2, 256, 256, ExplicitCoherence{pair_gamma(0.9)}, 5);
    WhitenParams wp;
    wp.ds_quantile = 1.0;
    const WhitenedStack w = whiten_stack(res.z, 0, wp);
    cplx c{};
    double p0 = 0.0, p1 = 0.0;
    for (int k = 0; k < 256 * 256; ++k) {
      c += w.data.at(1, k) * std::conj(w.data.at(0, k));
      p0 += std::norm(w.data.at(0, k));
      p1 += std::norm(w.data.at(1, k));
    }
    CHECK(std::abs(c) / std::sqrt(p0 * p1) <= 0.05);
  }
  SUBCASE("needs two dates") {
    const auto res = simulate(1, 16, 16, ExponentialCoherence{{0.0}, 0.0}, 6);
    CHECK_THROWS_AS(whiten_stack(res.z, 0, WhitenParams{}), Error);
  }
}

TEST_CASE("real and imaginary parts decorrelate after centering") {
  const int H = 320, W = 320;
  const auto res = simulate(1, H, W, ExponentialCoherence{{0.0}, 0.0}, 11, apodized(), {PhaseRamp{0.25, 0.0, 0.0}});
  auto corr_lag = [&](const ComplexPlane& p) {
    // Re at pixel k against Im at its right neighbour.
    double sab = 0, saa = 0, sbb = 0;
    for (int y = 0; y < p.H; ++y) {
      for (int x = 0; x + 1 < p.W; ++x) {
        const double a = p(y, x).real(), b = p(y, x + 1).imag();
        sab += a * b;
        saa += a * a;
        sbb += b * b;
      }
    }
    return std::pair{sab / std::sqrt(saa * sbb), static_cast<double>(p.H) * (p.W - 1)};
  };
  const ComplexPlane raw = res.z.plane(0);
  const auto [c_raw, n] = corr_lag(raw);
  const ComplexStack centered = recenter_spectrum(res.z, estimate_spectral_shift(raw));
  const auto [c_centered, n2] = corr_lag(centered.plane(0));
  CHECK(std::abs(c_centered) <= 3.0 / std::sqrt(n2));
  CHECK(std::abs(c_raw) > 3.0 / std::sqrt(n));
}
