#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>

namespace pwinv {

using cplx = std::complex<double>;

/// Flat 3D field over the periodic grid, x fastest.
template <class Scalar>
using Field = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using RealField = Field<double>;
using ComplexField = Field<cplx>;

/// Uniform periodic grid on [-pi, pi)^3 with nodes x_i = -pi + i*h.
struct Grid {
  int n = 0;
  double h = 0.0;

  Grid() = default;
  explicit Grid(int n_) : n(n_), h(2.0 * std::numbers::pi / n_) {
    if (n_ < 8) throw std::invalid_argument("grid: n must be >= 8");
  }

  std::size_t size() const { return std::size_t(n) * n * n; }
  double x(int i) const { return -std::numbers::pi + i * h; }
  double cell_volume() const { return h * h * h; }
  std::size_t index(int i, int j, int k) const {
    return (std::size_t(k) * n + j) * n + i;
  }
  int wrap(int i) const { return ((i % n) + n) % n; }

  template <class Scalar = double>
  Field<Scalar> zeros() const {
    return Field<Scalar>::Zero(Eigen::Index(size()));
  }

  /// Samples fn(x, y, z) at every node.
  template <class Fn>
  auto sample(Fn&& fn) const {
    using Scalar = std::decay_t<decltype(fn(0.0, 0.0, 0.0))>;
    Field<Scalar> out(static_cast<Eigen::Index>(size()));
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) out[index(i, j, k)] = fn(x(i), x(j), x(k));
    return out;
  }
};

/// Inclusive node-index box [lo, hi] per axis.
struct IndexBox {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{-1, -1, -1};

  bool contains(int i, int j, int k) const {
    return i >= lo[0] && i <= hi[0] && j >= lo[1] && j <= hi[1] && k >= lo[2] &&
           k <= hi[2];
  }
  int extent(int a) const { return hi[a] - lo[a] + 1; }
  std::size_t count() const {
    return std::size_t(extent(0)) * extent(1) * extent(2);
  }
  IndexBox grown(int m) const {
    IndexBox b = *this;
    for (int a = 0; a < 3; ++a) {
      b.lo[a] -= m;
      b.hi[a] += m;
    }
    return b;
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) fn(i, j, k);
  }
};

/// Sum of a field over the nodes of a box, times the cell volume.
template <class Derived>
auto box_integral(const Eigen::ArrayBase<Derived>& f, const Grid& g,
                  const IndexBox& box) {
  using Scalar = typename Derived::Scalar;
  Scalar acc(0);
  box.for_each([&](int i, int j, int k) { acc += f[g.index(i, j, k)]; });
  return acc * g.cell_volume();
}

template <class Derived>
double box_l2(const Eigen::ArrayBase<Derived>& f, const Grid& g,
              const IndexBox& box) {
  double acc = 0.0;
  box.for_each([&](int i, int j, int k) {
    acc += std::norm(f[g.index(i, j, k)]);
  });
  return std::sqrt(acc * g.cell_volume());
}

template <class Derived>
double grid_l2(const Eigen::ArrayBase<Derived>& f, const Grid& g) {
  return std::sqrt(f.abs2().sum() * g.cell_volume());
}

}  // namespace pwinv
