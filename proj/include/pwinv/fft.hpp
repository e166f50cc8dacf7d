#pragma once

#include "pwinv/grid.hpp"

namespace pwinv {

/// In-place 3D DFT on the periodic grid: out_m = sum_j in_j exp(-2 pi i m.j / n).
void fft3_forward(ComplexField& data, const Grid& g);
/// Inverse of fft3_forward, including the 1/n^3 factor.
void fft3_inverse(ComplexField& data, const Grid& g);

/// Signed frequency of DFT index m in [0, n): values in [-n/2, n/2).
inline int dft_frequency(int m, int n) { return m < n / 2 ? m : m - n; }

}  // namespace pwinv
