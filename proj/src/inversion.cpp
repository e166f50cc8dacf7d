#include "pwinv/inversion.hpp"

#include "pwinv/parallel.hpp"
#include "pwinv/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace pwinv {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

bool monotone(const std::vector<cplx>& v) {
  if (v.size() < 3) return true;
  auto mono = [&](auto part) {
    int sign = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double d = part(v[i]) - part(v[i - 1]);
      const int s = (d > 0) - (d < 0);
      if (s == 0) continue;
      if (sign != 0 && s != sign) return false;
      sign = s;
    }
    return true;
  };
  return mono([](cplx z) { return z.real(); }) && mono([](cplx z) { return z.imag(); });
}

// Least squares for values ~ a + b * basis with weights.
std::pair<cplx, cplx> fit_two(const std::vector<cplx>& basis, const std::vector<cplx>& y,
                              const std::vector<double>& w) {
  const Eigen::Index m = Eigen::Index(y.size());
  if (m == 1) return {y[0], 0.0};
  Eigen::MatrixXcd A(m, 2);
  Eigen::VectorXcd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = std::sqrt(w[std::size_t(i)]);
    A(i, 0) = s;
    A(i, 1) = s * basis[std::size_t(i)];
    b(i) = s * y[std::size_t(i)];
  }
  const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(b);
  return {x(0), x(1)};
}

std::vector<double> rho2_values(int box) {
  std::vector<double> v;
  for (int j = -box; j < box; ++j) v.push_back(j + 0.5);
  return v;
}

double rel_l2(const Eigen::ArrayXd& est, const Eigen::ArrayXd& truth) {
  const double n = std::sqrt(truth.square().sum());
  const double e = std::sqrt((est - truth).square().sum());
  return n > 0 ? e / n : e;
}

}  // namespace

const ModeEntry& ModeTable::find(double m1, double m2) const {
  for (const auto& e : entries)
    if (e.m1 == m1 && e.m2 == m2) return e;
  throw std::out_of_range("mode not in table");
}

std::string ModeTable::csv() const {
  std::ostringstream os;
  os << "rho1,rho2,tau_or_k,raw_re,raw_im,extrap_re,extrap_im,truth_re,truth_im\n";
  for (const auto& e : entries)
    for (std::size_t i = 0; i < e.params.size(); ++i) {
      const cplx t = e.has_truth ? e.truth_raw[i] : cplx(NAN, NAN);
      os << fmt(e.m1) << ',' << fmt(e.m2) << ',' << fmt(e.params[i]) << ',' << fmt(e.raw[i].real())
         << ',' << fmt(e.raw[i].imag()) << ',' << fmt(e.extrapolated.real()) << ','
         << fmt(e.extrapolated.imag()) << ',' << fmt(t.real()) << ',' << fmt(t.imag()) << '\n';
    }
  return os.str();
}

cplx richardson_tau2(const std::vector<double>& taus, const std::vector<cplx>& values) {
  if (taus.empty() || taus.size() != values.size())
    throw InversionError("invalid-input", "Richardson needs matching non-empty node lists");
  cplx acc = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double l = 1.0;
    const double xi = taus[i] * taus[i];
    for (std::size_t j = 0; j < taus.size(); ++j) {
      if (j == i) continue;
      const double xj = taus[j] * taus[j];
      if (xi == xj) throw InversionError("invalid-input", "repeated tau node");
      l *= -xj / (xi - xj);
    }
    acc += l * values[i];
  }
  return acc;
}

ModeEntry recover_quotient_mode(const TimeTransformSet& data, double rho1, double rho2,
                                const QuotientOptions& opt, const Configuration* truth) {
  if (opt.taus.empty()) throw InversionError("invalid-input", "empty tau list");
  const Grid g(data.grid_n);
  ModeEntry e;
  e.m1 = rho1;
  e.m2 = rho2;
  e.params = opt.taus;
  std::optional<ComplexField> W0;
  RealField gq;
  if (truth) gq = truth->f * truth->inv_c2();
  for (double tau : opt.taus) {
    const CgoPhase ph = opt.symbol == Symbol::grid ? CgoPhase::make_grid(rho1, rho2, cplx(0, tau), g)
                                                  : CgoPhase::make(rho1, rho2, cplx(0, tau));
    const TestWave bare = make_bare_wave(ph);
    e.raw.push_back(data.pair(bare, opt.pairing).value / tau);
    if (!truth) continue;
    if (!W0) W0 = bare.spatial(g);
    e.truth_raw.push_back(box_integral(ComplexField(gq * *W0), g, truth->domain.omega));
    if (opt.oracle) {
      CorrectorOptions co;
      co.dt = data.dt;
      const TestWave w = make_cgo_wave(solve_corrector(*truth, ph, co));
      // Verification value: the tail stays in its error instead of tripping
      // the coverage guard on modes whose corrected pairing is near zero.
      TimePairingOptions po = opt.pairing;
      po.max_tail_ratio = std::numeric_limits<double>::infinity();
      e.oracle_raw.push_back(data.pair(w, po).value / tau);
      e.oracle_truth.push_back(
          box_integral(ComplexField(gq * w.spatial(g)), g, truth->domain.omega));
    }
  }
  e.oracle = opt.oracle && truth;
  e.warning = !monotone(e.raw);
  e.extrapolated = richardson_tau2(opt.taus, e.raw);
  if (truth) {
    e.has_truth = true;
    e.truth_limit = e.truth_raw.front();
  }
  return e;
}

cplx quotient_divisor(const Grid& g, const Eigen::ArrayXd& phi, double kappa) {
  return phi_weighted_integral(phi, g.x(0), g.x(g.n - 1), cplx(-kappa, 0));
}

QuotientReconstruction recover_q0(const TimeTransformSet& data, const Eigen::ArrayXd& phi,
                                  const QuotientOptions& opt, const Configuration* truth) {
  const Grid g(data.grid_n);
  if (phi.size() != g.n) throw InversionError("invalid-input", "phi must have n samples");
  QuotientReconstruction out;
  out.options = opt;
  out.table.lattice = "rho1 in Z, rho2 in Z-1/2";
  out.table.divisor = std::string("int phi(x3) exp(-kappa x3) dx3, kappa ") +
                      (opt.symbol == Symbol::grid ? "grid-harmonic" : "continuum");
  const Eigen::ArrayXd aphi = phi.abs();

  // Divisors first so a degenerate kappa fails before any pairing work.
  std::vector<std::pair<double, double>> modes;
  for (int r1 = -opt.mode_box; r1 <= opt.mode_box; ++r1)
    for (double r2 : rho2_values(opt.mode_box)) modes.push_back({double(r1), r2});
  std::vector<cplx> divs;
  for (const auto& [r1, r2] : modes) {
    const double kappa = opt.symbol == Symbol::grid ? CgoPhase::grid_kappa(r1, r2, g.h)
                                                    : CgoPhase::continuum_kappa(r1, r2);
    const cplx D = quotient_divisor(g, phi, kappa);
    const double scale = std::abs(quotient_divisor(g, aphi, kappa));
    if (!(std::abs(D) > opt.degeneracy * scale)) {
      char b[160];
      std::snprintf(b, sizeof b, "divisor %.3e at kappa = %.17g (rho = (%g, %g))", std::abs(D),
                    kappa, r1, r2);
      throw InversionError("degenerate-divisor", b);
    }
    divs.push_back(D);
  }

  out.table.entries.resize(modes.size());
  parallel_for(modes.size(), [&](std::size_t m) {
    ModeEntry e = recover_quotient_mode(data, modes[m].first, modes[m].second, opt, truth);
    e.divisor.assign(e.params.size(), divs[m]);
    e.transverse = e.extrapolated / divs[m];
    if (e.has_truth) e.truth_limit /= divs[m];
    out.table.entries[m] = std::move(e);
  });
  out.q0 = synthesize_transverse(out.table, g);
  if (truth && truth->quotient) {
    out.has_truth = true;
    out.rel_l2 = rel_l2(out.q0, truth->quotient->transverse);
    out.max_err = (out.q0 - truth->quotient->transverse).abs().maxCoeff();
  }
  return out;
}

ModeEntry recover_f_mode(const std::vector<FrequencyField>& freqs, const BoundaryLayout& layout,
                         const Grid& g, int m1, int m2, const Eigen::ArrayXd& phi_tilde,
                         const SourceOptions& opt, const Configuration* truth) {
  if (phi_tilde.size() != g.n) throw InversionError("invalid-input", "phi~ must have n samples");
  ModeEntry e;
  e.m1 = m1;
  e.m2 = m2;
  const double mt2 = double(m1) * m1 + double(m2) * m2;
  const double scale = phi_tilde.abs().sum() * g.h;
  std::vector<cplx> P, basis;
  std::vector<double> w;
  for (const FrequencyField& F : freqs) {
    const double k = F.k;
    double xi3 = 0;
    if (opt.symbol == Symbol::grid) {
      const double om2 = F.omega2().real();
      const double sh = om2 * g.h * g.h / 4 - std::pow(std::sin(m1 * g.h / 2), 2) -
                        std::pow(std::sin(m2 * g.h / 2), 2);
      if (sh <= 0) continue;
      if (sh > 1)
        throw InversionError("k-band", "k = " + std::to_string(k) +
                                           " lies above the grid dispersion band");
      xi3 = grid_plane_xi3(m1, m2, om2, g.h);
    } else {
      if (k * k <= mt2) continue;
      xi3 = std::sqrt(k * k - mt2);
    }
    const double top = std::max({std::abs(double(m1)), std::abs(double(m2)), xi3});
    if (top * g.h >= std::numbers::pi)
      throw InversionError("k-band", "plane-wave component " + std::to_string(top) +
                                         " exceeds the grid Nyquist limit pi/h");
    // Nodal sum: the pairing reproduces the grid sum of f v, which factorizes
    // exactly into transverse and longitudinal grid sums.
    cplx D = 0;
    for (int k3 = 0; k3 < g.n; ++k3) D += phi_tilde[k3] * std::exp(cplx(0, xi3 * g.x(k3)));
    D *= g.h;
    if (!(std::abs(D) > opt.degeneracy * scale)) {
      char b[160];
      std::snprintf(b, sizeof b, "divisor %.3e at xi3 = %.17g (m = (%d, %d))", std::abs(D), xi3,
                    m1, m2);
      throw InversionError("degenerate-divisor", b);
    }
    const TestWave v = make_plane_wave({double(m1), double(m2), xi3});
    const PairingResult B = boundary_pairing_freq(F, layout, g, v);
    const cplx raw = B.value / F.s_src;
    e.params.push_back(k);
    e.raw.push_back(raw);
    e.divisor.push_back(D);
    P.push_back(raw / D);
    basis.push_back(opt.subtract_h ? 1.0 / F.s_src : cplx(1.0 / (k * k)));
    w.push_back(opt.weighted ? std::norm(D) : 1.0);
    if (truth)
      e.truth_raw.push_back(box_integral(ComplexField(truth->f * v.spatial(g)), g,
                                         truth->domain.omega));
  }
  if (P.empty()) throw InversionError("k-band", "no frequency exceeds the transverse mode |m|");
  e.transverse = fit_two(basis, P, w).first;
  e.extrapolated = e.transverse;
  e.warning = !monotone(P);
  if (truth) {
    e.has_truth = true;
    if (truth->source) {
      const auto& T = truth->source->transverse;
      cplx acc = 0;
      for (int j = 0; j < g.n; ++j)
        for (int i = 0; i < g.n; ++i)
          acc += T[Eigen::Index(j) * g.n + i] * std::exp(cplx(0, m1 * g.x(i) + m2 * g.x(j)));
      e.truth_limit = acc * g.h * g.h;
    } else {
      e.truth_limit = cplx(NAN, NAN);
    }
  }
  return e;
}

SourceReconstruction recover_f(const std::vector<FrequencyField>& freqs,
                               const BoundaryLayout& layout, const Grid& g,
                               const Eigen::ArrayXd& phi_tilde, const SourceOptions& opt,
                               const Configuration* truth) {
  SourceReconstruction out;
  out.table.lattice = "integer";
  out.table.divisor = "int phi~(x3) exp(i xi3 x3) dx3";
  const int side = 2 * opt.mode_box + 1;
  out.table.entries.resize(std::size_t(side) * side);
  parallel_for(out.table.entries.size(), [&](std::size_t idx) {
    const int m1 = int(idx % side) - opt.mode_box, m2 = int(idx / side) - opt.mode_box;
    out.table.entries[idx] = recover_f_mode(freqs, layout, g, m1, m2, phi_tilde, opt, truth);
  });
  for (const ModeEntry& e : out.table.entries) {
    if (!e.has_truth || e.params.size() < 4) continue;
    std::vector<std::pair<double, double>> s;
    for (std::size_t i = 0; i < e.params.size(); ++i)
      s.push_back({e.params[i], std::abs(e.raw[i] - e.truth_raw[i])});
    try {
      out.error_fits.push_back({{int(e.m1), int(e.m2)}, fit_decay_exponent(s)});
    } catch (const SpectralError&) {
    }
  }
  out.p = synthesize_transverse(out.table, g);
  out.f = lift_separated(g, out.p, phi_tilde);
  if (truth) {
    out.has_truth = true;
    out.rel_l2 = rel_l2(out.f, truth->f);
    out.max_err = (out.f - truth->f).abs().maxCoeff();
  }
  return out;
}

SpeedReconstruction recover_c(const RealField& f_rec, const RealField& q_rec, double theta,
                              const Bounds& bounds, const Configuration* truth) {
  if (!(theta > 0)) throw InversionError("invalid-input", "theta must be positive");
  if (f_rec.size() != q_rec.size()) throw InversionError("invalid-input", "grid mismatch");
  SpeedReconstruction out;
  const Eigen::Index m = f_rec.size();
  out.c = RealField::Ones(m);
  out.mask.assign(std::size_t(m), false);
  const double fmax = f_rec.abs().maxCoeff();
  const double lo = 0.5 * bounds.c_min, hi = 2.0 * bounds.c_max;
  std::size_t bad = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    // theta = 1 leaves the mask empty (the maximum itself is excluded).
    const bool in = fmax > 0 && (theta < 1 ? std::abs(f_rec[i]) >= theta * fmax : false);
    if (!in) continue;
    out.mask[std::size_t(i)] = true;
    ++out.mask_cells;
    const double r = q_rec[i] != 0.0 ? f_rec[i] / q_rec[i] : -1.0;
    if (!(r > 0)) {
      ++bad;
      continue;
    }
    double c = std::sqrt(r);
    if (c < lo || c > hi) {
      c = std::clamp(c, lo, hi);
      ++out.clamped;
    }
    out.c[i] = c;
  }
  if (bad > 0)
    throw InversionError("sign", std::to_string(bad) + " mask cells with f/q <= 0");
  if (truth && out.mask_cells > 0) {
    double e = 0, t = 0, mx = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!out.mask[std::size_t(i)]) continue;
      const double d = out.c[i] - truth->c[i];
      e += d * d;
      t += truth->c[i] * truth->c[i];
      mx = std::max(mx, std::abs(d));
    }
    out.has_truth = true;
    out.rel_l2 = std::sqrt(e / t);
    out.max_err = mx;
  } else if (truth) {
    out.has_truth = true;
  }
  return out;
}

Eigen::ArrayXd synthesize_transverse(const ModeTable& table, const Grid& g) {
  const int n = g.n;
  Eigen::ArrayXcd acc = Eigen::ArrayXcd::Zero(Eigen::Index(n) * n);
  for (const auto& e : table.entries) {
    // exp(-i m1 x1) and exp(-i m2 x2) tabulated once per mode.
    Eigen::ArrayXcd ex(n), ey(n);
    for (int i = 0; i < n; ++i) {
      ex[i] = std::exp(cplx(0, -e.m1 * g.x(i)));
      ey[i] = std::exp(cplx(0, -e.m2 * g.x(i)));
    }
    for (int j = 0; j < n; ++j)
      acc.segment(Eigen::Index(j) * n, n) += e.transverse * ey[j] * ex;
  }
  return acc.real() / (two_pi * two_pi);
}

RealField lift_separated(const Grid& g, const Eigen::ArrayXd& T, const Eigen::ArrayXd& L) {
  RealField f(Eigen::Index(g.size()));
  const int n = g.n;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        f[g.index(i, j, k)] = T[Eigen::Index(j) * n + i] * L[k];
  return f;
}

}  // namespace pwinv
