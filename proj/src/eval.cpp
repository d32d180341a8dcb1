#include "mtmerlin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

double psnr_log(const RealImage& estimate, const RealImage& truth, std::optional<double> peak) {
  if (!estimate.same_shape(truth) || truth.size() == 0) throw Error(ErrorCode::ShapeMismatch, "estimate and truth differ in shape");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sse = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (!(estimate.data[k] > 0.0) || !(truth.data[k] > 0.0)) {
      throw Error(ErrorCode::NonPositiveInput, "PSNR on log images needs positive inputs");
    }
    const double lt = std::log(truth.data[k]);
    const double d = std::log(estimate.data[k]) - lt;
    sse += d * d;
    lo = std::min(lo, lt);
    hi = std::max(hi, lt);
  }
  double p;
  if (peak) {
    p = *peak;
  } else {
    p = hi - lo;
    if (!(p > 0.0)) throw Error(ErrorCode::DegeneratePeak, "truth has no dynamic range; pass an explicit peak");
  }
  if (!(p > 0.0)) throw Error(ErrorCode::DegeneratePeak, "peak must be positive");
  const double mse = sse / static_cast<double>(truth.size());
  if (mse == 0.0) return kPsnrMax;
  return 10.0 * std::log10(p * p / mse);
}

BiasVariance bias_variance(const std::vector<RealImage>& estimates, const RealImage& truth) {
  if (estimates.size() < 2) throw Error(ErrorCode::InvalidArgument, "bias/variance needs at least two estimates");
  for (const auto& e : estimates) {
    if (!e.same_shape(truth)) throw Error(ErrorCode::ShapeMismatch, "estimate shape differs from truth");
  }
  const double M = static_cast<double>(estimates.size());
  BiasVariance out{RealImage(truth.H, truth.W), RealImage(truth.H, truth.W)};
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (!(truth.data[k] > 0.0)) throw Error(ErrorCode::NonPositiveInput, "truth must be positive");
    // Deviations from log truth: exact zeros stay exact.
    const double log_truth = std::log(truth.data[k]);
    double bias = 0.0;
    for (const auto& e : estimates) {
      if (!(e.data[k] > 0.0)) throw Error(ErrorCode::NonPositiveInput, "estimates must be positive");
      bias += std::log(e.data[k]) - log_truth;
    }
    bias /= M;
    double ss = 0.0;
    for (const auto& e : estimates) {
      const double d = std::log(e.data[k]) - log_truth - bias;
      ss += d * d;
    }
    out.bias2.data[k] = bias * bias;
    out.variance.data[k] = ss / (M - 1.0);
  }
  return out;
}

std::vector<int> NestedSets::prefix(int count) const {
  if (count < 0 || count > static_cast<int>(order.size())) throw Error(ErrorCode::OutOfBounds, "nested set size out of range");
  return {order.begin(), order.begin() + count};
}

NestedSets nested_sets(int available_dates, int ref, int max_extra, const RngHandle& rng) {
  if (ref < 0 || ref >= available_dates) throw Error(ErrorCode::InvalidArgument, "reference date out of range");
  if (max_extra < 0 || max_extra > available_dates - 1) {
    throw Error(ErrorCode::InvalidArgument, "max_extra must lie in [0, T-1]");
  }
  std::vector<int> dates;
  for (int t = 0; t < available_dates; ++t) {
    if (t != ref) dates.push_back(t);
  }
  RngHandle g = rng;
  for (int i = static_cast<int>(dates.size()) - 1; i > 0; --i) std::swap(dates[i], dates[g.below(i + 1)]);
  dates.resize(max_extra);
  return NestedSets{std::move(dates)};
}

std::vector<double> line_profile(const RealImage& img, PixelPoint p0, PixelPoint p1) {
  auto inside = [&](PixelPoint p) { return p.y >= 0.0 && p.x >= 0.0 && p.y <= img.H - 1 && p.x <= img.W - 1; };
  if (!inside(p0) || !inside(p1)) throw Error(ErrorCode::OutOfBounds, "profile endpoint outside the image");
  const double length = std::hypot(p1.y - p0.y, p1.x - p0.x);
  const int n = static_cast<int>(std::ceil(length - 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    const double y = p0.y + s * (p1.y - p0.y);
    const double x = p0.x + s * (p1.x - p0.x);
    const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(img.H - 2, 0));
    const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(img.W - 2, 0));
    const int y1 = std::min(y0 + 1, img.H - 1), x1 = std::min(x0 + 1, img.W - 1);
    const double fy = y - y0, fx = x - x0;
    out.push_back((1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) + fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1)));
  }
  return out;
}

BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "no values");
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, v.size() - 1);
    return v[i] + (pos - i) * (v[j] - v[i]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back(), v.size()};
}

}  // namespace mtmerlin
