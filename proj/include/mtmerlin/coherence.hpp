#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

namespace mtmerlin {

using CMatrix = Eigen::MatrixXcd;

/// Coherence matrix applied unchanged at every pixel.
struct ExplicitCoherence {
  CMatrix gamma;
};

/// Gamma(t_i, t_j) = exp(-|t_i - t_j| / tau). tau = +inf gives full coherence,
/// tau = 0 gives the identity.
struct ExponentialCoherence {
  std::vector<double> dates;
  double tau = 1.0;
};

using CoherenceSpec = std::variant<ExplicitCoherence, ExponentialCoherence>;

inline constexpr double kPsdTolerance = 1e-10;

/// Dates 0, 1, ..., T-1.
std::vector<double> default_dates(int T);

/// Materializes and validates the T x T matrix. Throws NotPSD when an explicit
/// matrix has an eigenvalue below -kPsdTolerance, InvalidArgument when it is
/// not Hermitian with unit diagonal.
CMatrix coherence_matrix(const CoherenceSpec& spec);

/// Lower-triangular L with L L^H = gamma and a real non-negative diagonal.
/// Rank-deficient (semidefinite) inputs get zero columns where the pivot
/// vanishes; indefinite inputs throw NotPSD.
CMatrix cholesky_psd(const CMatrix& gamma);

/// Mean of all T^2 entries (real part).
double average_coherence(const CMatrix& gamma);

/// Closed-form average coherence of the exponential model on dates 0..T-1.
double exponential_average_coherence(int T, double tau);

/// Solves exponential_average_coherence(T, tau) = target for tau by bisection.
/// target must lie in (1/T, 1).
double tau_for_average_coherence(int T, double target);

}  // namespace mtmerlin
