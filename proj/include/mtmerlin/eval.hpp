#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtmerlin/rng.hpp"
#include "mtmerlin/stack.hpp"

namespace mtmerlin {

/// Reported instead of +inf when estimate and truth coincide.
inline constexpr double kPsnrMax = std::numeric_limits<double>::max();

/// 10 log10(peak^2 / MSE) on natural-log images. peak = nullopt uses the
/// dynamic range of log(truth) and throws DegeneratePeak when it is zero.
double psnr_log(const RealImage& estimate, const RealImage& truth, std::optional<double> peak = std::nullopt);

struct BiasVariance {
  RealImage bias2;     // (mean log estimate - log truth)^2
  RealImage variance;  // unbiased sample variance of log estimates
};

BiasVariance bias_variance(const std::vector<RealImage>& estimates, const RealImage& truth);

/// Random order of the non-reference dates; the set with i extra dates is
/// the first i entries, so smaller sets are prefixes of larger ones.
struct NestedSets {
  std::vector<int> order;

  std::vector<int> prefix(int count) const;
};

NestedSets nested_sets(int available_dates, int ref, int max_extra, const RngHandle& rng);

struct PixelPoint {
  double y = 0.0;
  double x = 0.0;
};

/// Bilinear samples from p0 to p1 inclusive, ceil(length) + 1 samples at equal
/// spacing of at most one pixel. Throws OutOfBounds for endpoints off the image.
std::vector<double> line_profile(const RealImage& img, PixelPoint p0, PixelPoint p1);

struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::size_t count = 0;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

}  // namespace mtmerlin
