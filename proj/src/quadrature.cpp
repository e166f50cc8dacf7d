#include "pwinv/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pwinv {

std::vector<double> gregory_weights(int n, double ds) {
  static constexpr double end[5] = {95.0 / 288.0, 317.0 / 240.0, 23.0 / 30.0,
                                    793.0 / 720.0, 157.0 / 160.0};
  if (n < 10) throw std::invalid_argument("gregory_weights: need >= 10 samples");
  std::vector<double> w(std::size_t(n), ds);
  for (int i = 0; i < 5; ++i) {
    w[std::size_t(i)] = end[i] * ds;
    w[std::size_t(n - 1 - i)] = end[i] * ds;
  }
  return w;
}

cplx phi_weighted_integral(const Eigen::ArrayXd& profile, double a, double b,
                           cplx omega) {
  const int n = int(profile.size());
  if (n < 10) throw ResolutionError("phi_weighted_integral: too few samples");
  if (!(b > a)) throw std::invalid_argument("phi_weighted_integral: b <= a");
  const double ds = (b - a) / (n - 1);
  const double freq = std::abs(omega.imag());
  if (freq > 0.0 && 2.0 * std::numbers::pi / freq < 4.0 * ds)
    throw ResolutionError("phi_weighted_integral: oscillation period " +
                          std::to_string(2.0 * std::numbers::pi / freq) +
                          " shorter than 4 sample spacings");
  const auto w = gregory_weights(n, ds);
  cplx acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = a + i * ds;
    acc += w[std::size_t(i)] * profile[i] * std::exp(omega * s);
  }
  return acc;
}

}  // namespace pwinv
