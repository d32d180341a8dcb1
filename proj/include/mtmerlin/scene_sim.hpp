#pragma once

#include <cstdint>
#include <vector>

#include "mtmerlin/coherence.hpp"
#include "mtmerlin/rng.hpp"
#include "mtmerlin/sar_response.hpp"
#include "mtmerlin/stack.hpp"

namespace mtmerlin {

/// Ground truth of one simulated acquisition stack.
struct SceneModel {
  std::vector<RealImage> r;     // T reflectivity maps, strictly positive
  std::vector<ComplexPlane> d;  // T dominant-scatterer maps; empty means none
  CoherenceSpec coherence = ExponentialCoherence{{0.0}, 0.0};
  std::vector<RealImage> phi;   // T phase screens in radians; empty means zero
  std::vector<PhaseRamp> psi;   // T spectral-shift ramps; empty means zero
  SarResponseSpec sar;

  int T() const { return static_cast<int>(r.size()); }
  int H() const { return r.empty() ? 0 : r[0].H; }
  int W() const { return r.empty() ? 0 : r[0].W; }
};

void validate(const SceneModel& scene);

struct SpeckleDraw {
  ComplexStack epsilon;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// i.i.d. circular Gaussian N_c(0, 1) samples; pixel k draws its T dates from
/// its own stream so the result does not depend on evaluation order.
SpeckleDraw draw_speckle(int T, int H, int W, const RngHandle& rng, int threads = 1);

/// s(., k) = diag(sqrt(r(., k))) L eps(., k) with one factor shared by all pixels.
ComplexStack correlate_speckle(const SpeckleDraw& eps, const CMatrix& L, const std::vector<RealImage>& r);
/// Same with a per-pixel factor (L.size() == H*W).
ComplexStack correlate_speckle(const SpeckleDraw& eps, const std::vector<CMatrix>& L,
                               const std::vector<RealImage>& r);

struct SynthesisResult {
  ComplexStack z;                              // observed stack z~
  std::vector<RealImage> r_tilde;              // diag(Q diag(r_t) Q^H) per date
  std::vector<ComplexPlane> d_tilde;           // H_t diag(e^{j phi_t}) d_t per date
  std::vector<RealImage> d_tilde_intensity;    // |d~_t|^2
};

/// speckle -> temporal correlation -> + d -> SAR response, plus ground truth.
SynthesisResult synthesize_stack(const SceneModel& scene, const RngHandle& rng, int threads = 1);

// ---------------------------------------------------------------------------
// Example scene patterns.

struct PiecewiseSceneSpec {
  int H = 128;
  int W = 128;
  int T = 4;
  std::vector<double> class_levels = {1.0, 3.1622776601683795, 10.0};
  int cell_size = 16;             // mean Voronoi cell width in pixels
  double change_fraction = 0.2;   // area relabeled at each date
};

/// Voronoi partition with one class per cell; each date relabels cells
/// covering about `change_fraction` of the area relative to the base map.
std::vector<RealImage> make_piecewise_scene(const PiecewiseSceneSpec& spec, const RngHandle& rng);

/// Smooth zero-mean random field with Gaussian spectrum (radians for phase screens).
RealImage random_smooth_field(int H, int W, double amplitude, double correlation_length, const RngHandle& rng);

}  // namespace mtmerlin
