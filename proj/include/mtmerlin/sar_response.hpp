#pragma once

#include <vector>

#include "mtmerlin/stack.hpp"

namespace mtmerlin {

/// Linear phase ramp 2*pi*(fx*x + fy*y) + phase0 (x = column, y = row),
/// frequencies in cycles per input pixel.
struct PhaseRamp {
  double fx = 0.0;
  double fy = 0.0;
  double phase0 = 0.0;

  bool operator==(const PhaseRamp&) const = default;
};

void validate_ramp(const PhaseRamp& ramp);

/// Multiplies img by exp(sign * j * ramp). `scale_x`, `scale_y` convert pixel
/// indices of img into input-grid coordinates (1/oversampling factor).
void apply_ramp(ComplexPlane& img, const PhaseRamp& ramp, double sign, double scale_y = 1.0, double scale_x = 1.0);

enum class WindowType { Rectangular, RaisedCosine };

/// Spectral window w(f) = alpha + (1 - alpha) cos(2 pi f), f in [-1/2, 1/2].
/// alpha = 0.54 is Hamming, alpha = 0.5 is Hann, Rectangular ignores alpha.
struct Apodization {
  WindowType type = WindowType::RaisedCosine;
  double alpha = 0.54;
};

double window_gain(const Apodization& w, double frequency);

struct Oversampling {
  int num = 1;
  int den = 1;
};

struct SarResponseSpec {
  enum class Mode { Identity, ApodizedOversampled };

  Mode mode = Mode::Identity;
  Apodization apodization;
  Oversampling oversample_y;
  Oversampling oversample_x;

  /// Output extent along an axis of input length n.
  int output_rows(int H) const;
  int output_cols(int W) const;
  double factor_y() const;
  double factor_x() const;
};

void validate(const SarResponseSpec& spec, int H, int W);

/// One axis of the separable operator Q as a dense (n_out x n_in) real matrix,
/// normalized so every row has unit energy.
std::vector<double> response_axis_matrix(const SarResponseSpec& spec, int n_in, bool vertical);

/// Applies the centered, real, symmetric operator Q to one plane:
/// forward DFT, window, zero-pad, inverse DFT.
ComplexPlane apply_q(const ComplexPlane& img, const SarResponseSpec& spec);

/// z~_t = diag(e^{-j psi_t}) Q diag(e^{j(phi_t + psi_t)}) z_t for each date.
/// Empty phi / psi mean zero phase; otherwise one entry per date.
ComplexStack apply_sar_response(const ComplexStack& z, const std::vector<RealImage>& phi,
                                const std::vector<PhaseRamp>& psi, const SarResponseSpec& spec);

/// Diagonal of Q diag(r) Q^H, i.e. r convolved with |Q|^2.
RealImage lowpass_reflectivity(const RealImage& r, const SarResponseSpec& spec);

}  // namespace mtmerlin
