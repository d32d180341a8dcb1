#include "mtmerlin/coherence.hpp"

#include <cmath>
#include <limits>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

std::vector<double> default_dates(int T) {
  std::vector<double> d(T);
  for (int t = 0; t < T; ++t) d[t] = t;
  return d;
}

namespace {

CMatrix exponential_matrix(const ExponentialCoherence& spec) {
  const int T = static_cast<int>(spec.dates.size());
  if (T < 1) throw Error(ErrorCode::InvalidArgument, "exponential coherence needs at least one date");
  if (!(spec.tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
  CMatrix g(T, T);
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < T; ++j) {
      const double dt = std::abs(spec.dates[i] - spec.dates[j]);
      double v;
      if (i == j || dt == 0.0) {
        v = 1.0;
      } else if (std::isinf(spec.tau)) {
        v = 1.0;
      } else if (spec.tau == 0.0) {
        v = 0.0;
      } else {
        v = std::exp(-dt / spec.tau);
      }
      g(i, j) = v;
    }
  }
  return g;
}

void validate_explicit(const CMatrix& g) {
  if (g.rows() != g.cols() || g.rows() < 1) throw Error(ErrorCode::InvalidArgument, "coherence matrix must be square");
  const Eigen::Index T = g.rows();
  for (Eigen::Index i = 0; i < T; ++i) {
    if (std::abs(g(i, i) - 1.0) > kPsdTolerance) {
      throw Error(ErrorCode::InvalidArgument, "coherence matrix diagonal must be 1");
    }
    for (Eigen::Index j = 0; j < T; ++j) {
      if (std::abs(g(i, j) - std::conj(g(j, i))) > kPsdTolerance) {
        throw Error(ErrorCode::InvalidArgument, "coherence matrix must be Hermitian");
      }
      if (std::abs(g(i, j)) > 1.0 + kPsdTolerance) {
        throw Error(ErrorCode::InvalidArgument, "coherence entries must have modulus <= 1");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(g, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kPsdTolerance) {
    throw Error(ErrorCode::NotPSD, "coherence matrix has a negative eigenvalue");
  }
}

}  // namespace

CMatrix coherence_matrix(const CoherenceSpec& spec) {
  if (const auto* e = std::get_if<ExplicitCoherence>(&spec)) {
    validate_explicit(e->gamma);
    return e->gamma;
  }
  return exponential_matrix(std::get<ExponentialCoherence>(spec));
}

CMatrix cholesky_psd(const CMatrix& gamma) {
  if (gamma.rows() != gamma.cols()) throw Error(ErrorCode::InvalidArgument, "cholesky needs a square matrix");
  const Eigen::Index n = gamma.rows();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(gamma(i, i)));
  const double tol = kPsdTolerance * std::max(scale, 1.0);

  CMatrix L = CMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = gamma(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) pivot -= std::norm(L(j, k));
    if (pivot < -tol) throw Error(ErrorCode::NotPSD, "negative pivot in Cholesky factorization");
    if (pivot <= tol) {
      // Rank-deficient column: the remaining entries must already be explained.
      for (Eigen::Index i = j + 1; i < n; ++i) {
        std::complex<double> s = gamma(i, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
        if (std::abs(s) > std::sqrt(tol)) throw Error(ErrorCode::NotPSD, "indefinite matrix in Cholesky factorization");
      }
      continue;
    }
    const double d = std::sqrt(pivot);
    L(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      std::complex<double> s = gamma(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
      L(i, j) = s / d;
    }
  }
  return L;
}

double average_coherence(const CMatrix& gamma) {
  const double n = static_cast<double>(gamma.rows());
  return gamma.sum().real() / (n * n);
}

double exponential_average_coherence(int T, double tau) {
  if (T < 1) throw Error(ErrorCode::InvalidArgument, "T must be >= 1");
  // Dates 0..T-1: T diagonal ones plus 2 (T - lag) pairs at each lag.
  double sum = T;
  for (int lag = 1; lag < T; ++lag) {
    double c;
    if (std::isinf(tau)) c = 1.0;
    else if (tau == 0.0) c = 0.0;
    else c = std::exp(-lag / tau);
    sum += 2.0 * (T - lag) * c;
  }
  return sum / (static_cast<double>(T) * T);
}

double tau_for_average_coherence(int T, double target) {
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "T must be >= 2 to vary coherence");
  const double lo_val = 1.0 / T;
  if (!(target > lo_val && target < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "average coherence target must lie in (1/T, 1)");
  }
  // Average coherence is increasing in tau; bracket in log space.
  double lo = 1e-6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (exponential_average_coherence(T, mid) < target) lo = mid;
    else hi = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace mtmerlin
