#include "mtmerlin/stack.hpp"

#include "mtmerlin/error.hpp"

namespace mtmerlin {

ComplexStack::ComplexStack(int T, int H, int W, Layout layout, DType dtype)
    : T_(T), H_(H), W_(W), layout_(layout), dtype_(dtype) {
  if (T < 1 || H < 1 || W < 1) throw Error(ErrorCode::InvalidArgument, "stack dimensions must be >= 1");
  data_.assign(static_cast<std::size_t>(T) * H * W, cplx{});
}

ComplexPlane ComplexStack::plane(int t) const {
  ComplexPlane p(H_, W_);
  for (int k = 0; k < pixels(); ++k) p.data[k] = data_[index(t, k)];
  return p;
}

void ComplexStack::set_plane(int t, const ComplexPlane& p) {
  if (p.H != H_ || p.W != W_) throw Error(ErrorCode::ShapeMismatch, "plane does not match stack");
  for (int k = 0; k < pixels(); ++k) data_[index(t, k)] = p.data[k];
  if (dtype_ == DType::F32) quantize();
}

ComplexStack ComplexStack::from_planes(std::span<const ComplexPlane> planes) {
  if (planes.empty()) throw Error(ErrorCode::InvalidArgument, "no planes");
  ComplexStack s(static_cast<int>(planes.size()), planes[0].H, planes[0].W);
  for (std::size_t t = 0; t < planes.size(); ++t) s.set_plane(static_cast<int>(t), planes[t]);
  return s;
}

void ComplexStack::quantize() {
  if (dtype_ != DType::F32) return;
  for (auto& v : data_) {
    v = cplx(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
}

ComplexStack ComplexStack::with_dtype(DType dtype) const {
  ComplexStack out = *this;
  out.dtype_ = dtype;
  out.quantize();
  return out;
}

ComplexStack permute_layout(const ComplexStack& stack, Layout target) {
  ComplexStack out(stack.T(), stack.H(), stack.W(), target, stack.dtype());
  for (int t = 0; t < stack.T(); ++t) {
    for (int k = 0; k < stack.pixels(); ++k) out.at(t, k) = stack.at(t, k);
  }
  return out;
}

std::pair<RealImage, RealImage> split_reim(const ComplexPlane& img) {
  RealImage re(img.H, img.W), im(img.H, img.W);
  for (std::size_t i = 0; i < img.size(); ++i) {
    re.data[i] = img.data[i].real();
    im.data[i] = img.data[i].imag();
  }
  return {std::move(re), std::move(im)};
}

ComplexPlane merge_reim(const RealImage& re, const RealImage& im) {
  if (!re.same_shape(im)) throw Error(ErrorCode::ShapeMismatch, "real/imaginary shapes differ");
  ComplexPlane out(re.H, re.W);
  for (std::size_t i = 0; i < re.size(); ++i) out.data[i] = cplx(re.data[i], im.data[i]);
  return out;
}

RealImage intensity(const ComplexPlane& img) {
  RealImage out(img.H, img.W);
  for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = std::norm(img.data[i]);
  return out;
}

}  // namespace mtmerlin
