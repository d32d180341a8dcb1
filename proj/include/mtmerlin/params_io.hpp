#pragma once

#include <filesystem>
#include <iosfwd>

#include "mtmerlin/estimator.hpp"
#include "mtmerlin/stack.hpp"

namespace mtmerlin {

// MLP1 parameter container, little-endian:
//   4D 4C 50 31                  magic "MLP1"
//   u32 n, n bytes               architecture descriptor, "key=value\n" lines:
//                                in_channels, depth, base_width, kernel,
//                                leaky_slope, encoding, config_hash
//   u8                           tensor dtype (0 = f32, 1 = f64)
//   u32                          tensor count
//   per tensor, in layer order:
//     u16 n, n bytes             name
//     u8 rank, rank x u32        shape
//     prod(shape) values         dtype
// The last tensor, "normalization", holds the input shifts, input scales and
// output offset ([2 C + 1]).
void write_params(std::ostream& os, const EstimatorParams& params, DType dtype = DType::F64);
EstimatorParams read_params(std::istream& is);

void write_params(const std::filesystem::path& path, const EstimatorParams& params, DType dtype = DType::F64);
EstimatorParams read_params(const std::filesystem::path& path);

}  // namespace mtmerlin
