#include "pwinv/spectral.hpp"

#include "pwinv/fft.hpp"

#include <Eigen/Sparse>
#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pwinv {
namespace detail {

/// Stretched variable-coefficient Helmholtz operator on the periodic grid.
struct HelmholtzKernel {
  const Grid* g = nullptr;
  cplx s2 = 0.0;
  RealField inv_c2;
  bool unit_sigma = true;
  RealField sx, sy, sz;       // sigma on the faces i+1/2 of each axis
  std::vector<cplx> sn, sf;   // 1/s_a at nodes and faces (same for all axes)
  std::vector<int> ip, im;

  void apply(const cplx* u, cplx* y) const {
    const int n = g->n;
    const std::size_t nn = std::size_t(n) * n;
    const double ih2 = 1.0 / (g->h * g->h);
    for (int k = 0; k < n; ++k) {
      const std::size_t k0 = std::size_t(k) * nn, kp = std::size_t(ip[k]) * nn,
                        km = std::size_t(im[k]) * nn;
      for (int j = 0; j < n; ++j) {
        const std::size_t j0 = std::size_t(j) * n, jp = std::size_t(ip[j]) * n,
                          jm = std::size_t(im[j]) * n;
        for (int i = 0; i < n; ++i) {
          const std::size_t c = k0 + j0 + i;
          const cplx uc = u[c];
          const std::size_t xp = k0 + j0 + ip[i], xm = k0 + j0 + im[i];
          const std::size_t yp = k0 + jp + i, ym = k0 + jm + i;
          const std::size_t zp = kp + j0 + i, zm = km + j0 + i;
          double ax = 1, bx = 1, ay = 1, by = 1, az = 1, bz = 1;
          if (!unit_sigma) {
            ax = sx[Eigen::Index(c)];
            bx = sx[Eigen::Index(xm)];
            ay = sy[Eigen::Index(c)];
            by = sy[Eigen::Index(ym)];
            az = sz[Eigen::Index(c)];
            bz = sz[Eigen::Index(zm)];
          }
          const cplx lx = sn[std::size_t(i)] * (ax * sf[std::size_t(i)] * (u[xp] - uc) -
                                                bx * sf[std::size_t(im[i])] * (uc - u[xm]));
          const cplx ly = sn[std::size_t(j)] * (ay * sf[std::size_t(j)] * (u[yp] - uc) -
                                                by * sf[std::size_t(im[j])] * (uc - u[ym]));
          const cplx lz = sn[std::size_t(k)] * (az * sf[std::size_t(k)] * (u[zp] - uc) -
                                                bz * sf[std::size_t(im[k])] * (uc - u[zm]));
          y[c] = -(lx + ly + lz) * ih2 + s2 * inv_c2[Eigen::Index(c)] * uc;
        }
      }
    }
  }
};

HelmholtzKernel make_kernel(const Configuration& cfg, cplx s, cplx s2) {
  HelmholtzKernel K;
  const Grid& g = cfg.grid();
  const int n = g.n;
  K.g = &g;
  K.s2 = s2;
  K.inv_c2 = cfg.inv_c2();
  K.unit_sigma = cfg.sigma_is_unity();
  K.ip.resize(std::size_t(n));
  K.im.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    K.ip[std::size_t(i)] = g.wrap(i + 1);
    K.im[std::size_t(i)] = g.wrap(i - 1);
  }
  if (!K.unit_sigma) {
    K.sx.resize(cfg.sigma.size());
    K.sy.resize(cfg.sigma.size());
    K.sz.resize(cfg.sigma.size());
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const auto id = g.index(i, j, k);
          const double v = cfg.sigma[id];
          K.sx[id] = 0.5 * (v + cfg.sigma[g.index(K.ip[i], j, k)]);
          K.sy[id] = 0.5 * (v + cfg.sigma[g.index(i, K.ip[j], k)]);
          K.sz[id] = 0.5 * (v + cfg.sigma[g.index(i, j, K.ip[k])]);
        }
  }
  const Domain& d = cfg.domain;
  const double alpha = d.sponge.alpha;
  K.sn.resize(std::size_t(n));
  K.sf.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    K.sn[std::size_t(i)] = 1.0 / (1.0 + d.layer_profile(i) / (alpha + s));
    K.sf[std::size_t(i)] = 1.0 / (1.0 + d.layer_profile(i + 0.5) / (alpha + s));
  }
  return K;
}

}  // namespace detail
}  // namespace pwinv

// Matrix-free wrapper so Eigen's GMRES can drive the stencil.
namespace pwinv::detail {
class HelmholtzMatrix;
}
namespace Eigen::internal {
template <>
struct traits<pwinv::detail::HelmholtzMatrix>
    : public Eigen::internal::traits<Eigen::SparseMatrix<std::complex<double>>> {};
}  // namespace Eigen::internal

namespace pwinv::detail {

/// Inverse of the unit-coefficient periodic operator -Delta_h + s2 + i b |s2|.
class ShiftedLaplacian {
 public:
  using Scalar = cplx;
  void setup(const Grid& g, cplx s2, double shift) {
    g_ = &g;
    const int n = g.n;
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m)
      lam[std::size_t(m)] = 4.0 / (g.h * g.h) * std::pow(std::sin(std::numbers::pi * m / n), 2);
    const cplx sh = s2 + cplx(0, shift * std::abs(s2));
    inv_.resize(Eigen::Index(g.size()));
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          inv_[g.index(i, j, k)] = 1.0 / (lam[std::size_t(i)] + lam[std::size_t(j)] + lam[std::size_t(k)] + sh);
  }
  template <class Rhs>
  Eigen::VectorXcd solve(const Rhs& b) const {
    ComplexField w = b;
    fft3_forward(w, *g_);
    w *= inv_;
    fft3_inverse(w, *g_);
    return w.matrix();
  }

 private:
  const Grid* g_ = nullptr;
  ComplexField inv_;
};

/// A P^{-1}: the stencil composed with the preconditioner on the right, so
/// GMRES monitors the true residual.
class HelmholtzMatrix : public Eigen::EigenBase<HelmholtzMatrix> {
 public:
  using Scalar = cplx;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  HelmholtzMatrix(const HelmholtzKernel& k, const ShiftedLaplacian& p) : kernel_(&k), pre_(&p) {}
  Eigen::Index rows() const { return Eigen::Index(kernel_->g->size()); }
  Eigen::Index cols() const { return rows(); }

  template <class Rhs>
  Eigen::Product<HelmholtzMatrix, Rhs, Eigen::AliasFreeProduct> operator*(
      const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<HelmholtzMatrix, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }
  void apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
    const Eigen::VectorXcd z = pre_->solve(x);
    y.resize(z.size());
    kernel_->apply(z.data(), y.data());
  }

 private:
  const HelmholtzKernel* kernel_;
  const ShiftedLaplacian* pre_;
};

}  // namespace pwinv::detail

namespace Eigen::internal {
template <class Rhs>
struct generic_product_impl<pwinv::detail::HelmholtzMatrix, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<pwinv::detail::HelmholtzMatrix, Rhs,
                                generic_product_impl<pwinv::detail::HelmholtzMatrix, Rhs>> {
  using Scalar = typename Product<pwinv::detail::HelmholtzMatrix, Rhs>::Scalar;
  template <class Dest>
  static void scaleAndAddTo(Dest& dst, const pwinv::detail::HelmholtzMatrix& lhs, const Rhs& rhs,
                            const Scalar& alpha) {
    const Eigen::VectorXcd x = rhs;
    Eigen::VectorXcd y;
    lhs.apply(x, y);
    dst += alpha * y;
  }
};
}  // namespace Eigen::internal

namespace pwinv {

cplx laplace_variable(double k, Window w, double T) {
  const double eps = (w == Window::exponential_taper && T > 0) ? 3.0 / T : 0.0;
  return cplx(eps, k);
}

std::pair<cplx, cplx> effective_coefficients(TimeRule rule, cplx s, double dt) {
  if (rule == TimeRule::filon || dt <= 0) return {s * s, s};
  const cplx sd = 2.0 / dt * std::sinh(s * dt / 2.0);
  return {sd * sd, std::sinh(s * dt) / dt};
}

void check_sampling(double k, double dt) {
  if (dt * k > 0.5 + 1e-12)
    throw SpectralError("aliasing", "dt*k = " + std::to_string(dt * k) + " exceeds 0.5");
}

namespace {

void finish_tail(FrequencyField& F, const DecayEstimate* decay, double T) {
  if (!decay || decay->eta.empty()) return;
  // Tail of the transform relative to the initial local energy: the last
  // observed envelope times the remaining window mass, capped at one horizon.
  const double re = F.s.real();
  const double mass = re > 0 ? std::exp(-re * T) / re : T;
  F.tail_bound = decay->eta_final * std::min(mass, T);
  F.tail_warning = decay->eta_final > 1e-3;
}

}  // namespace

cplx transform_series(const std::vector<double>& samples, double dt, cplx s, TimeRule rule) {
  const int M = int(samples.size()) - 1;
  cplx acc = 0;
  for (int n = 0; n <= M; ++n) acc += transform_weight(rule, s, dt, n, M) * samples[std::size_t(n)];
  return acc;
}

FrequencyField temporal_fourier(const BoundaryDataset& data, double k, Window w, TimeRule rule,
                                const DecayEstimate* decay) {
  check_sampling(k, data.dt);
  FrequencyField F;
  F.k = k;
  F.s = laplace_variable(k, w, data.T());
  F.rule = rule;
  F.dt = data.dt;
  std::tie(F.s2, F.s_src) = effective_coefficients(rule, F.s, data.dt);
  const std::size_t m = data.layout.size();
  F.u.assign(m, 0.0);
  F.flux.assign(m, 0.0);
  for (int n = 0; n <= data.steps; ++n) {
    const cplx wt = transform_weight(rule, F.s, data.dt, n, data.steps);
    const double* row = data.data.data() + std::size_t(n) * m * 2;
    for (std::size_t q = 0; q < m; ++q) {
      F.u[q] += wt * row[2 * q];
      F.flux[q] += wt * row[2 * q + 1];
    }
  }
  finish_tail(F, decay, data.T());
  return F;
}

FrequencyField temporal_fourier(const std::vector<RealField>& frames, const Grid& g, double dt,
                                double k, Window w, TimeRule rule) {
  check_sampling(k, dt);
  FrequencyField F;
  F.k = k;
  const int M = int(frames.size()) - 1;
  F.s = laplace_variable(k, w, M * dt);
  F.rule = rule;
  F.dt = dt;
  std::tie(F.s2, F.s_src) = effective_coefficients(rule, F.s, dt);
  F.box = IndexBox{{0, 0, 0}, {g.n - 1, g.n - 1, g.n - 1}};
  F.values = g.zeros<cplx>();
  for (int n = 0; n <= M; ++n) F.values += transform_weight(rule, F.s, dt, n, M) * frames[std::size_t(n)].cast<cplx>();
  return F;
}

void request_frequencies(SolverSettings& s, const std::vector<double>& ks, Window w, bool interior) {
  s.boundary_s.clear();
  s.interior_s.clear();
  for (double k : ks) {
    s.boundary_s.push_back(laplace_variable(k, w, s.T));
    if (interior) s.interior_s.push_back(laplace_variable(k, w, s.T));
  }
}

FrequencyField frequency_field(const SimulationResult& r, std::size_t i) {
  const TraceTransform& b = r.boundary.at(i);
  FrequencyField F;
  F.s = b.s;
  F.k = b.s.imag();
  F.rule = b.rule;
  F.dt = b.dt;
  std::tie(F.s2, F.s_src) = effective_coefficients(b.rule, b.s, b.dt);
  F.u = b.u;
  F.flux = b.flux;
  if (i < r.interior.size()) {
    F.box = r.interior[i].box;
    F.values = r.interior[i].values;
  }
  finish_tail(F, &r.decay, r.steps * r.dt);
  return F;
}

ComplexField apply_helmholtz(const Configuration& cfg, cplx s, cplx s2, const ComplexField& u) {
  const detail::HelmholtzKernel K = detail::make_kernel(cfg, s, s2);
  ComplexField y(u.size());
  K.apply(u.data(), y.data());
  return y;
}

FrequencyField helmholtz_solve(const Configuration& cfg, cplx s, const HelmholtzSettings& set) {
  const Grid& g = cfg.grid();
  const double k = s.imag();
  if (k <= 0) throw SpectralError("pollution", "k must be positive");
  if (set.pollution_guard && k * g.h > set.max_kh + 1e-12)
    throw SpectralError("pollution", "k*h = " + std::to_string(k * g.h) + " exceeds " +
                                         std::to_string(set.max_kh));
  FrequencyField F;
  F.k = k;
  F.s = s;
  F.rule = set.rule;
  F.dt = set.rule == TimeRule::trapezoid ? set.dt : 0.0;
  std::tie(F.s2, F.s_src) = effective_coefficients(set.rule, s, F.dt);
  F.box = IndexBox{{0, 0, 0}, {g.n - 1, g.n - 1, g.n - 1}};

  const RealField ic2 = cfg.inv_c2();
  const ComplexField rhs = (F.s_src * cfg.f.cast<cplx>() + cfg.h.cast<cplx>()) * ic2.cast<cplx>();
  const double bnorm = rhs.matrix().norm();
  if (bnorm == 0.0) {
    F.values = g.zeros<cplx>();
  } else {
    const detail::HelmholtzKernel K = detail::make_kernel(cfg, s, F.s2);
    detail::ShiftedLaplacian P;
    P.setup(g, F.s2, set.shift);
    const detail::HelmholtzMatrix A(K, P);
    Eigen::GMRES<detail::HelmholtzMatrix, Eigen::IdentityPreconditioner> solver;
    solver.set_restart(set.restart);
    solver.setMaxIterations(set.max_iterations);
    solver.setTolerance(set.tolerance);
    solver.compute(A);
    const Eigen::VectorXcd y = solver.solve(rhs.matrix());
    F.iterations = int(solver.iterations());
    const Eigen::VectorXcd x = P.solve(y);
    Eigen::VectorXcd ax(x.size());
    K.apply(x.data(), ax.data());
    F.residual = (ax - rhs.matrix()).norm() / bnorm;
    if (F.residual > set.tolerance * (1 + 1e-6))
      throw SpectralError("non-convergence", "relative residual " + std::to_string(F.residual) +
                                                 " after " + std::to_string(F.iterations) +
                                                 " iterations");
    F.values = x.array();
  }
  const BoundaryLayout L = make_boundary_layout(cfg.domain, cfg.sigma);
  std::vector<cplx> avg, nrm;
  face_traces(L, F.values, g.h, avg, nrm);
  F.u = avg;
  F.flux.resize(L.size());
  for (std::size_t q = 0; q < L.size(); ++q) F.flux[q] = L.nodes[q].sigma_face * nrm[q];
  return F;
}

RealField ansatz_term(const Configuration& cfg, int j, char which) {
  if (j < 0) throw std::invalid_argument("ansatz order must be >= 0");
  RealField v = which == 'h' ? cfg.h : cfg.f;
  const LeapfrogStepper op(cfg, 1.0, false);
  const RealField c2 = cfg.c * cfg.c;
  RealField tmp;
  for (int i = 0; i < j; ++i) {
    op.apply_operator(v, tmp);
    v = c2 * tmp;
  }
  return v;
}

RemainderField remainder(const FrequencyField& F, const Configuration& cfg) {
  if (!F.has_values()) throw std::invalid_argument("remainder needs interior values");
  const Grid& g = cfg.grid();
  RemainderField R;
  R.k = F.k;
  R.values = g.zeros<cplx>();
  const cplx w2 = F.omega2();
  cfg.domain.omega.for_each([&](int i, int j, int k) {
    const auto id = g.index(i, j, k);
    R.values[id] = F.values[id] + (F.s_src * cfg.f[id] + cfg.h[id]) / w2;
  });
  R.l2 = box_l2(R.values, g, cfg.domain.omega);
  R.linf = R.values.abs().maxCoeff();
  return R;
}

double forcing_norm(const FrequencyField& F, const Configuration& cfg) {
  const ComplexField rhs = (F.s_src * cfg.f.cast<cplx>() + cfg.h.cast<cplx>()) * cfg.inv_c2().cast<cplx>();
  return box_l2(rhs, cfg.grid(), cfg.domain.omega);
}

DecayFit fit_decay_exponent(std::vector<std::pair<double, double>> samples) {
  const std::size_t n = samples.size();
  if (n < 4) throw SpectralError("insufficient-span", "need at least 4 samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(samples[i].first > samples[i - 1].first))
      throw SpectralError("insufficient-span", "k must be strictly increasing");
  if (samples.back().first < 3.0 * samples.front().first)
    throw SpectralError("insufficient-span", "k must span a factor of at least 3");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(samples[i].second > 0)) throw SpectralError("insufficient-span", "values must be positive");
    A(Eigen::Index(i), 0) = std::log(samples[i].first);
    A(Eigen::Index(i), 1) = 1.0;
    b[Eigen::Index(i)] = std::log(samples[i].second);
  }
  const Eigen::Vector2d x = A.colPivHouseholderQr().solve(b);
  DecayFit fit;
  fit.slope = x[0];
  fit.intercept = x[1];
  fit.samples = std::move(samples);
  const double rss = (A * x - b).squaredNorm();
  const double dof = double(n) - 2.0;
  const Eigen::Matrix2d cov = (A.transpose() * A).inverse() * (rss / dof);
  // Student t quantiles (97.5%) for small degrees of freedom.
  static const double t975[] = {0, 12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228};
  const double t = dof <= 10 ? t975[std::size_t(dof)] : 2.0;
  fit.halfwidth = t * std::sqrt(std::max(cov(0, 0), 0.0));
  return fit;
}

}  // namespace pwinv
