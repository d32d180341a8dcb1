#include "mtmerlin/slcs_io.hpp"

#include <fstream>

#include "mtmerlin/byte_io.hpp"

namespace mtmerlin {

namespace {
constexpr unsigned char kMagic[6] = {0x53, 0x4C, 0x43, 0x53, 0x01, 0x00};
}

void write_slcs(std::ostream& os, const ComplexStack& stack) {
  os.write(reinterpret_cast<const char*>(kMagic), sizeof(kMagic));
  bytes::put<std::uint32_t>(os, static_cast<std::uint32_t>(stack.T()));
  bytes::put<std::uint32_t>(os, static_cast<std::uint32_t>(stack.H()));
  bytes::put<std::uint32_t>(os, static_cast<std::uint32_t>(stack.W()));
  bytes::put<std::uint8_t>(os, static_cast<std::uint8_t>(stack.dtype()));
  bytes::put<std::uint8_t>(os, static_cast<std::uint8_t>(stack.layout()));
  for (int i = 0; i < 6; ++i) bytes::put<std::uint8_t>(os, 0);
  for (const cplx& v : stack.data()) {
    if (stack.dtype() == DType::F32) {
      bytes::put<float>(os, static_cast<float>(v.real()));
      bytes::put<float>(os, static_cast<float>(v.imag()));
    } else {
      bytes::put<double>(os, v.real());
      bytes::put<double>(os, v.imag());
    }
  }
  if (!os) throw Error(ErrorCode::Io, "failed writing SLCS stream");
}

ComplexStack read_slcs(std::istream& is) {
  bytes::expect(is, kMagic, sizeof(kMagic), "SLCS");
  const auto T = bytes::get<std::uint32_t>(is);
  const auto H = bytes::get<std::uint32_t>(is);
  const auto W = bytes::get<std::uint32_t>(is);
  const auto dtype = bytes::get<std::uint8_t>(is);
  const auto layout = bytes::get<std::uint8_t>(is);
  for (int i = 0; i < 6; ++i) {
    if (bytes::get<std::uint8_t>(is) != 0) throw Error(ErrorCode::Format, "SLCS reserved bytes must be zero");
  }
  if (dtype > 1 || layout > 1) throw Error(ErrorCode::Format, "SLCS dtype/layout out of range");
  if (T == 0 || H == 0 || W == 0 || static_cast<std::uint64_t>(T) * H * W > (1ull << 32)) {
    throw Error(ErrorCode::Format, "SLCS dimensions out of range");
  }
  ComplexStack stack(static_cast<int>(T), static_cast<int>(H), static_cast<int>(W),
                     static_cast<Layout>(layout), static_cast<DType>(dtype));
  for (cplx& v : stack.data()) {
    if (stack.dtype() == DType::F32) {
      const float re = bytes::get<float>(is);
      const float im = bytes::get<float>(is);
      v = cplx(re, im);
    } else {
      const double re = bytes::get<double>(is);
      const double im = bytes::get<double>(is);
      v = cplx(re, im);
    }
  }
  return stack;
}

void write_slcs(const std::filesystem::path& path, const ComplexStack& stack) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_slcs(os, stack);
}

ComplexStack read_slcs(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_slcs(is);
}

ComplexStack pack_real_maps(const std::vector<RealImage>& maps, DType dtype) {
  if (maps.empty()) throw Error(ErrorCode::InvalidArgument, "no maps to pack");
  ComplexStack s(static_cast<int>(maps.size()), maps[0].H, maps[0].W, Layout::DateMajor, dtype);
  for (std::size_t t = 0; t < maps.size(); ++t) {
    if (!maps[t].same_shape(maps[0])) throw Error(ErrorCode::ShapeMismatch, "maps differ in shape");
    for (int k = 0; k < s.pixels(); ++k) s.at(static_cast<int>(t), k) = cplx(maps[t].data[k], 0.0);
  }
  s.quantize();
  return s;
}

std::vector<RealImage> unpack_real_maps(const ComplexStack& stack) {
  std::vector<RealImage> maps;
  for (int t = 0; t < stack.T(); ++t) {
    RealImage m(stack.H(), stack.W());
    for (int k = 0; k < stack.pixels(); ++k) m.data[k] = stack.at(t, k).real();
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace mtmerlin
