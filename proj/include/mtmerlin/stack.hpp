#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mtmerlin {

using cplx = std::complex<double>;

enum class Layout : std::uint8_t { DateMajor = 0, PixelMajor = 1 };
enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

/// H x W real raster, row-major.
struct RealImage {
  int H = 0;
  int W = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(int h, int w, double fill = 0.0) : H(h), W(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return data.size(); }
  double& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * W + x]; }
  double operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * W + x]; }
  bool same_shape(const RealImage& o) const { return H == o.H && W == o.W; }
};

/// H x W complex raster, row-major.
struct ComplexPlane {
  int H = 0;
  int W = 0;
  std::vector<cplx> data;

  ComplexPlane() = default;
  ComplexPlane(int h, int w, cplx fill = {}) : H(h), W(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return data.size(); }
  cplx& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * W + x]; }
  const cplx& operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * W + x]; }
  bool same_shape(const ComplexPlane& o) const { return H == o.H && W == o.W; }
};

/// T x H x W complex stack.
///
/// Samples are held in double precision whatever the declared dtype; an F32
/// stack only ever holds values that are exactly representable in float
/// (see `quantize`). DateMajor stores plane t contiguously; PixelMajor stores
/// the T dates of each pixel contiguously.
class ComplexStack {
 public:
  ComplexStack() = default;
  ComplexStack(int T, int H, int W, Layout layout = Layout::DateMajor, DType dtype = DType::F64);

  int T() const { return T_; }
  int H() const { return H_; }
  int W() const { return W_; }
  int pixels() const { return H_ * W_; }
  Layout layout() const { return layout_; }
  DType dtype() const { return dtype_; }

  std::span<const cplx> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  std::size_t index(int t, int pixel) const {
    return layout_ == Layout::DateMajor ? static_cast<std::size_t>(t) * pixels() + pixel
                                        : static_cast<std::size_t>(pixel) * T_ + t;
  }
  cplx& at(int t, int y, int x) { return data_[index(t, y * W_ + x)]; }
  const cplx& at(int t, int y, int x) const { return data_[index(t, y * W_ + x)]; }
  cplx& at(int t, int pixel) { return data_[index(t, pixel)]; }
  const cplx& at(int t, int pixel) const { return data_[index(t, pixel)]; }

  ComplexPlane plane(int t) const;
  void set_plane(int t, const ComplexPlane& p);

  /// Builds a date-major F64 stack from equally shaped planes.
  static ComplexStack from_planes(std::span<const ComplexPlane> planes);

  /// Rounds every sample to the declared dtype (no-op for F64).
  void quantize();
  ComplexStack with_dtype(DType dtype) const;

  bool operator==(const ComplexStack& o) const = default;

 private:
  int T_ = 0;
  int H_ = 0;
  int W_ = 0;
  Layout layout_ = Layout::DateMajor;
  DType dtype_ = DType::F64;
  std::vector<cplx> data_;
};

/// Reorders samples to `target`; bijective, exact.
ComplexStack permute_layout(const ComplexStack& stack, Layout target);

std::pair<RealImage, RealImage> split_reim(const ComplexPlane& img);
ComplexPlane merge_reim(const RealImage& re, const RealImage& im);

RealImage intensity(const ComplexPlane& img);

}  // namespace mtmerlin
