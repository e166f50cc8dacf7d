#include "pwinv/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pwinv {
namespace {

constexpr cplx I(0.0, 1.0);

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

double inv_norm_const() { return std::pow(2.0 * std::numbers::pi, -1.5); }

}  // namespace

double CgoPhase::continuum_kappa(double z1, double z2) { return std::hypot(z1, z2); }

double CgoPhase::grid_kappa(double z1, double z2, double h) {
  const double s = std::pow(std::sin(z1 * h / 2), 2) + std::pow(std::sin(z2 * h / 2), 2);
  return 2.0 / h * std::asinh(std::sqrt(s));
}

CgoPhase CgoPhase::make(double z1, double z2, cplx rho0) {
  if (!is_integer(z1) || !is_integer(z2 + 0.5))
    throw CgoError("invalid-phase", "zeta_1 must be an integer and zeta_2 a half-integer");
  CgoPhase p;
  p.kappa = continuum_kappa(z1, z2);
  p.zeta = {cplx(z1), cplx(z2), cplx(0, p.kappa)};
  p.rho0 = rho0;
  return p;
}

CgoPhase CgoPhase::make_grid(double z1, double z2, cplx rho0, const Grid& g) {
  CgoPhase p = make(z1, z2, rho0);
  p.symbol = Symbol::grid;
  p.h = g.h;
  p.kappa = grid_kappa(z1, z2, g.h);
  p.zeta[2] = cplx(0, p.kappa);
  return p;
}

cplx CgoPhase::null_defect() const {
  return zeta[0] * zeta[0] + zeta[1] * zeta[1] + zeta[2] * zeta[2];
}

double lattice_frequency(int axis, int m, int n) {
  if (axis < 2) return m < n / 2 ? m : m - n;
  const int beta = m <= n / 2 ? m : m - n;
  return beta - 0.5;
}

cplx conjugated_symbol(const CgoPhase& ph, const rvec3& a) {
  if (ph.symbol == Symbol::continuum) {
    cplx dot = 0;
    for (int j = 0; j < 3; ++j) dot += a[j] * a[j] + 2.0 * ph.zeta[j] * a[j];
    return -dot;
  }
  cplx s = 0;
  for (int j = 0; j < 3; ++j) {
    const cplx v = std::sin((ph.zeta[j] + a[j]) * (ph.h / 2));
    s += v * v;
  }
  return -4.0 / (ph.h * ph.h) * s;
}

ComplexField apply_g_zeta(const Grid& g, const ComplexField& f, const CgoPhase& ph) {
  return apply_lattice_multiplier(g, f, [&](const rvec3& a) { return 1.0 / conjugated_symbol(ph, a); });
}

ComplexField apply_conjugated_operator(const Grid& g, const ComplexField& f,
                                       const CgoPhase& ph) {
  return apply_lattice_multiplier(g, f, [&](const rvec3& a) { return conjugated_symbol(ph, a); });
}

double min_denominator(const Grid& g, const CgoPhase& ph) {
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.n; ++k)
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i) {
        const rvec3 a{lattice_frequency(0, i, g.n), lattice_frequency(1, j, g.n),
                      lattice_frequency(2, k, g.n)};
        m = std::min(m, std::abs(conjugated_symbol(ph, a)));
      }
  return m;
}

ComplexField lattice_mode(const Grid& g, const rvec3& a) {
  const double c = inv_norm_const();
  return g.sample([&](double x, double y, double z) {
    return c * std::exp(I * (a[0] * x + a[1] * y + a[2] * z));
  });
}

cplx lattice_coefficient(const Grid& g, const ComplexField& f, const rvec3& a) {
  const ComplexField e = lattice_mode(g, a);
  return (f * e.conjugate()).sum() * g.cell_volume();
}

cplx effective_rho0_sq(cplx rho0, double dt) {
  if (dt <= 0) return rho0 * rho0;
  const cplx s = -I * rho0;
  const cplx sd = 2.0 / dt * std::sinh(s * dt / 2.0);
  return -sd * sd;
}

CgoCorrector solve_corrector(const Configuration& cfg, const CgoPhase& ph,
                             const CorrectorOptions& opt) {
  return solve_corrector(cfg.grid(), cfg.inv_c2(), ph, opt);
}

CgoCorrector solve_corrector(const Grid& g, const RealField& inv_c2, const CgoPhase& ph,
                             const CorrectorOptions& opt) {
  CgoCorrector out;
  out.phase = ph;
  out.rho0_sq = effective_rho0_sq(ph.rho0, opt.dt);
  const ComplexField q = out.rho0_sq * inv_c2.cast<cplx>();
  const double qmax = q.abs().maxCoeff();
  if (qmax > 0.25)
    throw CgoError("smallness-violation",
                   "||rho0^2/c^2||_inf = " + std::to_string(qmax) + " exceeds 1/4");
  out.contraction_bound = 2.0 * qmax;
  out.norm_rhs = 4.0 * std::norm(ph.rho0) * grid_l2(inv_c2, g);

  ComplexField psi = g.zeros<cplx>();
  double prev_inc = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    ComplexField next = -apply_g_zeta(g, ComplexField(q * (psi + 1.0)), ph);
    const double inc = grid_l2(ComplexField(next - psi), g);
    if (it > 1 && prev_inc > 1e-14) out.contraction = std::max(out.contraction, inc / prev_inc);
    psi = std::move(next);
    out.iterations = it;
    out.increment = inc;
    prev_inc = inc;
    if (inc <= opt.tolerance) break;
  }
  if (out.increment > opt.tolerance)
    throw CgoError("non-contraction", "increment " + std::to_string(out.increment) +
                                          " after " + std::to_string(out.iterations) +
                                          " iterations");
  // Delta psi + 2i zeta.grad psi + (rho0^2/c^2)(1 + psi) = 0
  const ComplexField res = apply_conjugated_operator(g, psi, ph) + q * (psi + 1.0);
  const double qn = grid_l2(q, g);
  out.residual = qn > 0 ? grid_l2(res, g) / qn : grid_l2(res, g);
  out.norm_lhs = grid_l2(psi, g);
  out.psi = std::move(psi);
  return out;
}

cplx TestWave::exponential(double x, double y, double z) const {
  return std::exp(I * (phase[0] * x + phase[1] * y + phase[2] * z));
}

ComplexField TestWave::spatial(const Grid& g) const {
  ComplexField w = g.sample([&](double x, double y, double z) { return exponential(x, y, z); });
  if (corrected()) w *= (psi + 1.0);
  return w;
}

ComplexField TestWave::initial_rate(const Grid& g) const {
  return ComplexField(I * rho0 * spatial(g));
}

WaveTraces TestWave::traces(const Domain& dom, const BoundaryLayout& L, TraceMode mode) const {
  const Grid& g = dom.grid;
  WaveTraces t;
  if (mode == TraceMode::nodal) {
    face_traces(L, spatial(g), g.h, t.value, t.normal);
    return t;
  }
  t.value.resize(L.size());
  t.normal.resize(L.size());
  for (std::size_t q = 0; q < L.size(); ++q) {
    const auto& nd = L.nodes[q];
    const cplx e = exponential(nd.x, nd.y, nd.z);
    cplx p = 0, dp = 0;
    if (corrected()) {
      const cplx a = psi[Eigen::Index(nd.in)], b = psi[Eigen::Index(nd.out)];
      p = 0.5 * (a + b);
      dp = (b - a) / g.h;
    }
    t.value[q] = e * (1.0 + p);
    t.normal[q] = double(nd.sign) * I * phase[std::size_t(nd.axis)] * e * (1.0 + p) + e * dp;
  }
  return t;
}

TestWave make_cgo_wave(const CgoCorrector& c) {
  TestWave w = make_bare_wave(c.phase);
  w.psi = c.psi;
  return w;
}

TestWave make_bare_wave(const CgoPhase& ph) {
  TestWave w;
  w.kind = TestWave::Kind::time_cgo;
  w.phase = ph.zeta;
  w.rho0 = ph.rho0;
  return w;
}

TestWave make_plane_wave(const rvec3& xi) {
  TestWave w;
  w.kind = TestWave::Kind::plane;
  w.phase = {cplx(xi[0]), cplx(xi[1]), cplx(xi[2])};
  w.k = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
  return w;
}

double grid_plane_xi3(double m1, double m2, double omega2, double h) {
  const double s = omega2 * h * h / 4 - std::pow(std::sin(m1 * h / 2), 2) -
                   std::pow(std::sin(m2 * h / 2), 2);
  if (s < 0 || s > 1)
    throw std::domain_error("no grid plane wave with this transverse mode and frequency");
  return 2.0 / h * std::asin(std::sqrt(s));
}

double wave_residual(const Grid& g, const RealField& inv_c2, const TestWave& w,
                     const IndexBox& box, double dt) {
  const ComplexField W = w.spatial(g);
  const cplx r2 = effective_rho0_sq(w.rho0, dt);
  const double ih2 = 1.0 / (g.h * g.h);
  const std::size_t sx = 1, sy = std::size_t(g.n), sz = std::size_t(g.n) * g.n;
  double m = 0;
  box.for_each([&](int i, int j, int k) {
    const std::size_t id = g.index(i, j, k);
    auto at = [&](std::size_t p) { return W[Eigen::Index(p)]; };
    const cplx lap = (at(id + sx) + at(id - sx) + at(id + sy) + at(id - sy) + at(id + sz) +
                      at(id - sz) - 6.0 * at(id)) * ih2;
    m = std::max(m, std::abs(-r2 * inv_c2[Eigen::Index(id)] * at(id) - lap));
  });
  return m;
}

}  // namespace pwinv
