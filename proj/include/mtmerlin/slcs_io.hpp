#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtmerlin/stack.hpp"

namespace mtmerlin {

// SLCS container, little-endian:
//   offset 0  : 53 4C 43 53 01 00   magic "SLCS" + version 1
//   offset 6  : u32 T, u32 H, u32 W
//   offset 18 : u8 dtype (0 = f32, 1 = f64)
//   offset 19 : u8 layout (0 = date-major, 1 = pixel-major)
//   offset 20 : 6 reserved zero bytes
//   offset 26 : T*H*W interleaved (re, im) samples in storage order
inline constexpr std::size_t kSlcsHeaderSize = 26;

void write_slcs(std::ostream& os, const ComplexStack& stack);
ComplexStack read_slcs(std::istream& is);

void write_slcs(const std::filesystem::path& path, const ComplexStack& stack);
ComplexStack read_slcs(const std::filesystem::path& path);

/// Real maps are stored as an SLCS stack whose imaginary parts are zero.
ComplexStack pack_real_maps(const std::vector<RealImage>& maps, DType dtype = DType::F64);
std::vector<RealImage> unpack_real_maps(const ComplexStack& stack);

}  // namespace mtmerlin
