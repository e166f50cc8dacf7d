#pragma once

#include "pwinv/grid.hpp"

#include <stdexcept>
#include <vector>

namespace pwinv {

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sixth-order Gregory weights for n uniform samples with spacing ds.
/// Away from the five end samples on each side they reduce to ds.
std::vector<double> gregory_weights(int n, double ds);

/// High-order quadrature of profile(s) * exp(omega * s) on [a, b] from
/// uniform samples (first sample at a, last at b).
cplx phi_weighted_integral(const Eigen::ArrayXd& profile, double a, double b,
                           cplx omega);

}  // namespace pwinv
