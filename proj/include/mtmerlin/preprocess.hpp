#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "mtmerlin/sar_response.hpp"
#include "mtmerlin/stack.hpp"

namespace mtmerlin {

/// Spectral centroid of an image, as the ramp that moves a centered spectrum
/// onto it. Recentering multiplies by the conjugate of this ramp.
using SpectralShift = PhaseRamp;

/// Circular first moment of the power spectrum, per axis, after averaging the
/// power over the other axis. Axes whose spectrum is flat to within sampling
/// noise (resultant below 4/sqrt(H*W)) report zero shift. Requires H, W >= 8;
/// throws DegenerateSpectrum for an all-zero image.
SpectralShift estimate_spectral_shift(const ComplexPlane& img);

/// Multiplies every date by the conjugate ramp of `shift`. Phase-only.
ComplexStack recenter_spectrum(const ComplexStack& stack, const SpectralShift& shift);

/// Pixels whose intensity is strictly above the `quantile` intensity and
/// strictly above all 3x3 neighbours keep their complex value; all others are 0.
ComplexPlane detect_dominant_scatterers(const ComplexPlane& img, double quantile);

/// Per-pixel pair statistics against the reference date.
///
/// gamma(k) is the normalized windowed correlation of the background
/// components, sum(z_ref z_i^*) / sqrt(sum|z_i|^2 sum|z_ref|^2); r_i and r_ref
/// are windowed mean background intensities.
struct CoherenceMaps {
  ComplexPlane gamma;
  RealImage r_i;
  RealImage r_ref;
};

/// Boxcar estimate over an odd `window` (>= 3), truncated at image borders.
CoherenceMaps estimate_coherence_pair(const ComplexPlane& z_i, const ComplexPlane& z_ref, const ComplexPlane& d_i,
                                      const ComplexPlane& d_ref, int window);

inline constexpr double kDefaultCoherenceGuard = 1e-3;

struct WhitenedPair {
  ComplexPlane z_i;
  int saturated = 0;  // pixels whose |gamma| was clamped to 1 - guard
};

/// Closed-form 2x2 whitening of date i against the reference:
///   z_i' = tau z_i + (1 - tau) d_i - sqrt(r_i / r_ref) tau gamma^* (z_ref - d_ref),
/// tau = 1 / sqrt(1 - |gamma|^2). The reference image is not an output: it is
/// never modified.
WhitenedPair whiten_pair(const ComplexPlane& z_i, const ComplexPlane& z_ref, const ComplexPlane& d_i,
                         const ComplexPlane& d_ref, const CoherenceMaps& maps,
                         double guard = kDefaultCoherenceGuard);

struct WhitenParams {
  bool enabled = true;
  int coherence_window = 7;
  /// Scatterer detection quantile; 1 disables detection.
  double ds_quantile = 0.999;
  double guard = kDefaultCoherenceGuard;
  /// Externally supplied scatterer maps (one per date), replacing detection.
  std::vector<ComplexPlane> external_scatterers;
};

struct WhitenedStack {
  ComplexStack data;
  int ref_index = 0;
  bool whitened = false;
  std::vector<CoherenceMaps> maps;      // one per date; the reference entry is empty
  std::vector<ComplexPlane> scatterers; // d^ used for each date
  int saturated = 0;
};

using StageLogger = std::function<void(std::string_view stage, std::string_view detail)>;

/// detect -> interfere -> whiten -> reinsert for every date i != ref. The input
/// must already be spectrum-centered. With whitening disabled the data is
/// returned unchanged.
WhitenedStack whiten_stack(const ComplexStack& centered, int ref_index, const WhitenParams& params,
                           const StageLogger& log = {});

/// Wraps an already-preprocessed stack without modifying it.
WhitenedStack as_whitened(const ComplexStack& stack, int ref_index);

}  // namespace mtmerlin
