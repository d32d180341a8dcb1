#include "mtmerlin/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

namespace {

// Planner calls are not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void run_dft(int rank, const int* dims, std::vector<cplx>& buf, int sign) {
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft(rank, dims, p, p, sign, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw Error(ErrorCode::InvalidArgument, "fftw plan failed");
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(buf.size()));
  for (auto& v : buf) v *= scale;
}

ComplexPlane dft2(const ComplexPlane& img, int sign) {
  if (img.H < 1 || img.W < 1) throw Error(ErrorCode::InvalidArgument, "empty plane");
  ComplexPlane out = img;
  const int dims[2] = {img.H, img.W};
  run_dft(2, dims, out.data, sign);
  return out;
}

}  // namespace

ComplexPlane dft2_forward(const ComplexPlane& img) { return dft2(img, FFTW_FORWARD); }
ComplexPlane dft2_inverse(const ComplexPlane& spectrum) { return dft2(spectrum, FFTW_BACKWARD); }

std::vector<cplx> dft1_forward(std::span<const cplx> x) {
  std::vector<cplx> buf(x.begin(), x.end());
  const int n = static_cast<int>(buf.size());
  run_dft(1, &n, buf, FFTW_FORWARD);
  return buf;
}

std::vector<cplx> dft1_inverse(std::span<const cplx> x) {
  std::vector<cplx> buf(x.begin(), x.end());
  const int n = static_cast<int>(buf.size());
  run_dft(1, &n, buf, FFTW_BACKWARD);
  return buf;
}

double bin_frequency(int k, int n) {
  const int signed_k = (2 * k >= n) ? k - n : k;
  return static_cast<double>(signed_k) / n;
}

}  // namespace mtmerlin
