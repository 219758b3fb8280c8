#pragma once

#include <complex>
#include <vector>

namespace slowlight::detail {

/// In-place 2D DFT of an n0 x n1 row-major array. sign = -1 is the forward
/// transform, +1 the backward one; neither is normalized.
void fft2d(std::vector<std::complex<double>>& data, int n0, int n1, int sign);

} // namespace slowlight::detail
