#pragma once

#include "pwinv/config.hpp"
#include "pwinv/fft.hpp"
#include "pwinv/forward.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace pwinv {

/// Raised by the corrector solve; `kind` is "smallness-violation",
/// "non-contraction" or "invalid-phase".
struct CgoError : std::runtime_error {
  std::string kind;
  CgoError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

/// Which operator the multiplier inverts: the continuum Delta + 2i zeta.grad
/// on the shifted lattice, or the same conjugation of the 7-point Laplacian.
enum class Symbol { continuum, grid };

using cvec3 = std::array<cplx, 3>;
using rvec3 = std::array<double, 3>;

/// zeta = (z1, z2, 0) + i(0, 0, kappa), z1 integer, z2 half-integer.
/// For Symbol::grid kappa is chosen so that exp(i zeta.x) is discretely
/// harmonic (sinh^2(kappa h/2) = sin^2(z1 h/2) + sin^2(z2 h/2)); the
/// continuum phase has kappa = |(z1, z2)| and zeta.zeta = 0.
struct CgoPhase {
  cvec3 zeta{};
  double kappa = 0.0;
  cplx rho0 = 0.0;  // the wave carries exp(i rho0 t)
  Symbol symbol = Symbol::continuum;
  double h = 0.0;  // grid spacing for Symbol::grid

  static CgoPhase make(double z1, double z2, cplx rho0);
  static CgoPhase make_grid(double z1, double z2, cplx rho0, const Grid& g);
  /// Derived kappa for either convention.
  static double continuum_kappa(double z1, double z2);
  static double grid_kappa(double z1, double z2, double h);

  cplx null_defect() const;  // zeta.zeta
  double tau() const { return rho0.imag(); }
};

/// Shifted lattice value of DFT index m along `axis` (alpha_3 in Z - 1/2,
/// symmetric about 0 so |alpha_j| <= n/2).
double lattice_frequency(int axis, int m, int n);

/// Applies the diagonal multiplier sym(alpha) in the shifted basis
/// e_alpha = (2 pi)^{-3/2} exp(i alpha.x).
template <class Fn>
ComplexField apply_lattice_multiplier(const Grid& g, const ComplexField& f, Fn&& sym);

/// Symbol of Delta + 2i zeta.grad (continuum: -(alpha.alpha + 2 zeta.alpha);
/// grid: conjugated 7-point Laplacian) at lattice point alpha.
cplx conjugated_symbol(const CgoPhase& ph, const rvec3& alpha);

/// G_zeta f = sum f_alpha / symbol(alpha) e_alpha.
ComplexField apply_g_zeta(const Grid& g, const ComplexField& f, const CgoPhase& ph);
/// (Delta + 2i zeta.grad) f, spectrally.
ComplexField apply_conjugated_operator(const Grid& g, const ComplexField& f,
                                       const CgoPhase& ph);
/// Smallest |symbol(alpha)| over the stored lattice.
double min_denominator(const Grid& g, const CgoPhase& ph);

/// Lattice coefficient <f, e_alpha> for alpha given by DFT indices.
cplx lattice_coefficient(const Grid& g, const ComplexField& f, const rvec3& alpha);
/// e_alpha sampled on the grid.
ComplexField lattice_mode(const Grid& g, const rvec3& alpha);

struct CorrectorOptions {
  double tolerance = 1e-12;  // L2(Q) increment
  int max_iterations = 200;
  /// Positive: time step of leapfrog data, so rho0^2 is replaced by its
  /// discrete-time counterpart -(2/dt)^2 sinh^2(s dt/2), s = -i rho0.
  double dt = 0.0;
};

struct CgoCorrector {
  CgoPhase phase;
  ComplexField psi;
  int iterations = 0;
  double increment = 0.0;
  double contraction = 0.0;        // largest ratio of successive increments
  double contraction_bound = 0.0;  // 2 ||rho0^2/c^2||_inf
  double residual = 0.0;           // relative spectral residual of the corrector PDE
  double norm_lhs = 0.0;           // ||psi||_{L2(Q)}
  double norm_rhs = 0.0;           // 4 |rho0|^2 ||1/c^2||_{L2(Q)}
  cplx rho0_sq = 0.0;              // the squared temporal frequency used
  bool bound_holds() const { return norm_lhs < norm_rhs || (norm_lhs == 0 && norm_rhs == 0); }
};

/// Fixed point psi = -G_zeta(rho0^2/c^2 (1 + psi)) from psi = 0.
CgoCorrector solve_corrector(const Configuration& cfg, const CgoPhase& ph,
                             const CorrectorOptions& opt = {});
/// Same with an explicit 1/c^2 field on the grid.
CgoCorrector solve_corrector(const Grid& g, const RealField& inv_c2, const CgoPhase& ph,
                             const CorrectorOptions& opt = {});

/// Values and outward normal derivatives of a test wave on the faces of
/// Omega.
struct WaveTraces {
  std::vector<cplx> value, normal;
};

enum class TraceMode {
  nodal,     // face average / staggered difference of node values (dataset layout)
  analytic,  // exact exponential at the face point, discrete gradient of psi
};

/// Time-domain CGO wave w = exp(i rho0 t + i zeta.x)(1 + psi), or the
/// frequency plane wave v = exp(i xi.x).
struct TestWave {
  enum class Kind { time_cgo, plane };
  Kind kind = Kind::time_cgo;
  cvec3 phase{};       // zeta or xi
  cplx rho0 = 0.0;     // time kind
  double k = 0.0;      // plane kind: |xi|
  ComplexField psi;    // empty for the bare exponential
  bool corrected() const { return psi.size() > 0; }

  cplx exponential(double x, double y, double z) const;
  /// w(., 0) (time kind) or v (plane kind) on the grid.
  ComplexField spatial(const Grid& g) const;
  ComplexField initial_value(const Grid& g) const { return spatial(g); }
  ComplexField initial_rate(const Grid& g) const;  // d_t w(., 0) = i rho0 w(., 0)
  WaveTraces traces(const Domain& dom, const BoundaryLayout& L,
                    TraceMode mode = TraceMode::nodal) const;
  /// exp(i rho0 t): time dependence of the time-domain kind.
  cplx time_factor(double t) const { return std::exp(cplx(0, 1) * rho0 * t); }
};

TestWave make_cgo_wave(const CgoCorrector& c);
TestWave make_bare_wave(const CgoPhase& ph);
TestWave make_plane_wave(const rvec3& xi);

/// xi3 >= 0 with sum_a (2/h)^2 sin^2(xi_a h/2) = omega2 for xi = (m1, m2, xi3);
/// throws std::domain_error when no such xi3 exists.
double grid_plane_xi3(double m1, double m2, double omega2, double h);

/// Discrete wave-equation residual -rho0^2 w/c^2 - Delta_h w of the time-domain
/// wave at t = 0, max norm over the nodes of `box`.
double wave_residual(const Grid& g, const RealField& inv_c2, const TestWave& w,
                     const IndexBox& box, double dt = 0.0);

/// rho0^2 or its discrete-time counterpart.
cplx effective_rho0_sq(cplx rho0, double dt);

// ---------------------------------------------------------------------------

template <class Fn>
ComplexField apply_lattice_multiplier(const Grid& g, const ComplexField& f, Fn&& sym) {
  const int n = g.n;
  ComplexField w(static_cast<Eigen::Index>(g.size()));
  std::vector<cplx> ramp(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) ramp[std::size_t(k)] = std::exp(cplx(0, 0.5 * g.x(k)));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const auto id = g.index(i, j, k);
        w[id] = f[id] * ramp[std::size_t(k)];
      }
  fft3_forward(w, g);
  for (int k = 0; k < n; ++k) {
    const double a3 = lattice_frequency(2, k, n);
    for (int j = 0; j < n; ++j) {
      const double a2 = lattice_frequency(1, j, n);
      for (int i = 0; i < n; ++i) {
        const double a1 = lattice_frequency(0, i, n);
        w[g.index(i, j, k)] *= sym(rvec3{a1, a2, a3});
      }
    }
  }
  fft3_inverse(w, g);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) w[g.index(i, j, k)] *= std::conj(ramp[std::size_t(k)]);
  return w;
}

}  // namespace pwinv
