#pragma once

#include "mtmerlin/stack.hpp"

namespace mtmerlin {

// Unitary 2D DFT: both directions scale by 1/sqrt(H*W).
ComplexPlane dft2_forward(const ComplexPlane& img);
ComplexPlane dft2_inverse(const ComplexPlane& spectrum);

// Unitary 1D DFT of a contiguous sequence.
std::vector<cplx> dft1_forward(std::span<const cplx> x);
std::vector<cplx> dft1_inverse(std::span<const cplx> x);

/// Signed frequency (cycles/sample) of DFT bin k for length n, in [-0.5, 0.5).
double bin_frequency(int k, int n);

}  // namespace mtmerlin
