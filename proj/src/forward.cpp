#include "pwinv/forward.hpp"

#include <algorithm>
#include <cmath>

namespace pwinv {

namespace {

// (z - 1 + e^{-z}) / z^2
cplx filon_end(cplx z) {
  if (std::abs(z) < 0.5) {
    cplx acc = 0.0, term = 0.5;  // (-z)^m / (m+2)!
    for (int m = 0; m < 18; ++m) {
      acc += term;
      term *= -z / double(m + 3);
    }
    return acc;
  }
  return (z - 1.0 + std::exp(-z)) / (z * z);
}

// (e^z + e^{-z} - 2) / z^2
cplx filon_mid(cplx z) {
  if (std::abs(z) < 0.5) {
    cplx acc = 0.0, term = 1.0;  // 2 z^{2m} / (2m+2)!
    for (int m = 0; m < 10; ++m) {
      acc += term;
      term *= z * z / double((2 * m + 3) * (2 * m + 4));
    }
    return acc;
  }
  return (std::exp(z) + std::exp(-z) - 2.0) / (z * z);
}

}  // namespace

cplx transform_weight(TimeRule rule, cplx s, double dt, int n, int M) {
  const cplx e = std::exp(-s * (n * dt));
  if (rule == TimeRule::trapezoid) {
    const double w = (n == 0 || n == M) ? 0.5 * dt : dt;
    return w * e;
  }
  const cplx z = s * dt;
  if (n == 0) return dt * filon_end(z);
  if (n == M) return dt * filon_end(-z) * e;
  return dt * filon_mid(z) * e;
}

BoundaryLayout make_boundary_layout(const Domain& dom, const RealField& sigma) {
  BoundaryLayout L;
  const Grid& g = dom.grid;
  L.area = g.h * g.h;
  const auto& b = dom.omega;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
      const int inside = side == 0 ? b.lo[axis] : b.hi[axis];
      const int outside = side == 0 ? inside - 1 : inside + 1;
      for (int q = b.lo[t2]; q <= b.hi[t2]; ++q)
        for (int p = b.lo[t1]; p <= b.hi[t1]; ++p) {
          std::array<int, 3> ii{}, oo{};
          ii[axis] = inside;
          oo[axis] = outside;
          ii[t1] = oo[t1] = p;
          ii[t2] = oo[t2] = q;
          FaceNode nd;
          nd.in = g.index(ii[0], ii[1], ii[2]);
          nd.out = g.index(oo[0], oo[1], oo[2]);
          nd.axis = axis;
          nd.sign = side == 0 ? -1 : 1;
          std::array<double, 3> pos{g.x(ii[0]), g.x(ii[1]), g.x(ii[2])};
          pos[axis] = dom.face(axis, side);
          nd.x = pos[0];
          nd.y = pos[1];
          nd.z = pos[2];
          nd.sigma_face = 0.5 * (sigma[Eigen::Index(nd.in)] + sigma[Eigen::Index(nd.out)]);
          L.nodes.push_back(nd);
        }
    }
  return L;
}

DecayEstimate estimate_decay(std::vector<double> t, std::vector<double> eta,
                             double baseline) {
  DecayEstimate d;
  d.t = std::move(t);
  d.eta = std::move(eta);
  const std::size_t m = d.t.size();
  for (std::size_t i = 1; i < m; ++i)
    d.integral += 0.5 * (d.eta[i] + d.eta[i - 1]) * (d.t[i] - d.t[i - 1]);
  d.eta_final = m ? d.eta.back() : 0.0;
  // Eventually decreasing: nothing in the final third exceeds the peak of
  // the middle third.
  if (m >= 3) {
    const std::size_t a = m / 3, b = 2 * m / 3;
    double mid = 0, tail = 0;
    for (std::size_t i = a; i < b; ++i) mid = std::max(mid, d.eta[i]);
    for (std::size_t i = b; i < m; ++i) tail = std::max(tail, d.eta[i]);
    d.eventually_decreasing = tail <= mid;
  }
  d.slow_decay = baseline > 0 && d.integral > 5.0 * baseline;
  return d;
}

double stable_dt(const Configuration& cfg) {
  const double cmax = cfg.c.maxCoeff();
  const double smax = cfg.sigma.maxCoeff();
  return cfg.grid().h / (std::sqrt(3.0 * smax) * cmax);
}

LeapfrogStepper::LeapfrogStepper(const Configuration& cfg, double dt, bool absorbing)
    : g_(cfg.grid()), dt_(dt), unit_sigma_(cfg.sigma_is_unity()) {
  const int n = g_.n;
  c2dt2_ = cfg.c * cfg.c * (dt * dt / (g_.h * g_.h));
  inv_c2_ = (cfg.c * cfg.c).inverse();
  ip_.resize(std::size_t(n));
  im_.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    ip_[std::size_t(i)] = g_.wrap(i + 1);
    im_[std::size_t(i)] = g_.wrap(i - 1);
  }
  if (!unit_sigma_) {
    sx_.resize(cfg.sigma.size());
    sy_.resize(cfg.sigma.size());
    sz_.resize(cfg.sigma.size());
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const auto id = g_.index(i, j, k);
          const double s = cfg.sigma[id];
          sx_[id] = 0.5 * (s + cfg.sigma[g_.index(ip_[i], j, k)]);
          sy_[id] = 0.5 * (s + cfg.sigma[g_.index(i, ip_[j], k)]);
          sz_[id] = 0.5 * (s + cfg.sigma[g_.index(i, j, ip_[k])]);
        }
  }
  if (absorbing && cfg.domain.sponge.cells > 0) {
    const Domain& d = cfg.domain;
    const int W = d.sponge.cells;
    const double alpha = d.sponge.alpha;
    auto coeffs = [&](double z, double& b, double& a) {
      b = std::exp(-(z + alpha) * dt);
      a = z > 0 ? z / (z + alpha) * (b - 1.0) : 0.0;
    };
    bn_.resize(std::size_t(n));
    an_.resize(std::size_t(n));
    bf_.resize(std::size_t(n));
    af_.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
      const double zn = d.layer_profile(i);
      const double zf = d.layer_profile(i + 0.5);
      coeffs(zn, bn_[std::size_t(i)], an_[std::size_t(i)]);
      coeffs(zf, bf_[std::size_t(i)], af_[std::size_t(i)]);
      if (i <= W || i >= n - W) slab_.push_back(i);
      in_slab_.push_back(i <= W || i >= n - W);
    }
    pml_ = true;
  }
}

void LeapfrogStepper::apply_operator(const RealField& u, RealField& out) const {
  const int n = g_.n;
  const std::size_t nn = std::size_t(n) * n;
  out.resize(u.size());
  const double ih2 = 1.0 / (g_.h * g_.h);
  for (int k = 0; k < n; ++k) {
    const std::size_t kp = std::size_t(ip_[k]) * nn, km = std::size_t(im_[k]) * nn,
                      k0 = std::size_t(k) * nn;
    for (int j = 0; j < n; ++j) {
      const std::size_t jp = std::size_t(ip_[j]) * n, jm = std::size_t(im_[j]) * n,
                        j0 = std::size_t(j) * n;
      for (int i = 0; i < n; ++i) {
        const std::size_t id = k0 + j0 + i;
        const double uc = u[id];
        const double ue = u[k0 + j0 + ip_[i]], uw = u[k0 + j0 + im_[i]];
        const double un = u[k0 + jp + i], us = u[k0 + jm + i];
        const double ut = u[kp + j0 + i], ub = u[km + j0 + i];
        if (unit_sigma_) {
          out[id] = (ue + uw + un + us + ut + ub - 6.0 * uc) * ih2;
        } else {
          const double sw = sx_[k0 + j0 + im_[i]], ss = sy_[k0 + jm + i], sb = sz_[km + j0 + i];
          out[id] = (sx_[id] * (ue - uc) - sw * (uc - uw) + sy_[id] * (un - uc) -
                     ss * (uc - us) + sz_[id] * (ut - uc) - sb * (uc - ub)) *
                    ih2;
        }
      }
    }
  }
}

void LeapfrogStepper::step(const RealField& prev, const RealField& curr,
                           RealField& next) const {
  if (pml_) throw std::logic_error("absorbing stepper needs the full WaveState");
  advance(prev, curr, next, nullptr);
}

// u^{n+1} = 2u^n - u^{n-1} + dt^2 c^2 (L u^n + extra).
void LeapfrogStepper::advance(const RealField& prev, const RealField& curr,
                              RealField& next, const RealField* extra) const {
  const int n = g_.n;
  const std::size_t nn = std::size_t(n) * n;
  next.resize(curr.size());
  for (int k = 0; k < n; ++k) {
    const std::size_t kp = std::size_t(ip_[k]) * nn, km = std::size_t(im_[k]) * nn,
                      k0 = std::size_t(k) * nn;
    for (int j = 0; j < n; ++j) {
      const std::size_t jp = std::size_t(ip_[j]) * n, jm = std::size_t(im_[j]) * n,
                        j0 = std::size_t(j) * n;
      const std::size_t row = k0 + j0;
      for (int i = 0; i < n; ++i) {
        const std::size_t id = row + i;
        const double uc = curr[id];
        const double ue = curr[row + ip_[i]], uw = curr[row + im_[i]];
        const double un = curr[k0 + jp + i], us = curr[k0 + jm + i];
        const double ut = curr[kp + j0 + i], ub = curr[km + j0 + i];
        double lap;
        if (unit_sigma_) {
          lap = ue + uw + un + us + ut + ub - 6.0 * uc;
        } else {
          const double sw = sx_[row + im_[i]], ss = sy_[k0 + jm + i], sb = sz_[km + j0 + i];
          lap = sx_[id] * (ue - uc) - sw * (uc - uw) + sy_[id] * (un - uc) -
                ss * (uc - us) + sz_[id] * (ut - uc) - sb * (uc - ub);
        }
        if (extra) lap += (*extra)[id];
        next[id] = 2.0 * uc + c2dt2_[id] * lap - prev[id];
      }
    }
  }
}

// Convolutional layer: each derivative d_a in the layer is replaced by
// d_a / s_a, s_a = 1 + zeta_a / (alpha + i k), through recursive memories
// psi_a (faces) and chi_a (nodes). `extra` receives h^2 (D-psi_a + chi_a).
void LeapfrogStepper::layer_update(WaveState& s, RealField& extra) const {
  const int n = g_.n;
  const double ih = 1.0 / g_.h, h2 = g_.h * g_.h;
  const RealField& u = s.curr;
  extra.setZero(u.size());
  const std::size_t stride[3] = {1, std::size_t(n), std::size_t(n) * n};
  for (int a = 0; a < 3; ++a) {
    RealField& psi = s.aux[std::size_t(a)];
    RealField& chi = s.aux[std::size_t(3 + a)];
    const std::size_t sa = stride[a];
    // Visit the layer slab of axis a row by row (x fastest).
    auto visit = [&](auto&& fn) {
      for (int k = 0; k < n; ++k) {
        if (a == 2 && !in_slab_[std::size_t(k)]) continue;
        for (int j = 0; j < n; ++j) {
          if (a == 1 && !in_slab_[std::size_t(j)]) continue;
          const std::size_t row = stride[2] * k + stride[1] * j;
          const int p_axis = a == 1 ? j : k;
          if (a == 0) {
            for (int i : slab_) fn(row + i, i);
          } else {
            for (int i = 0; i < n; ++i) fn(row + i, p_axis);
          }
        }
      }
    };
    auto shift = [&](std::size_t id, int p, int to) {
      return id + sa * std::size_t(to) - sa * std::size_t(p);
    };
    visit([&](std::size_t id, int p) {
      const std::size_t up = shift(id, p, ip_[std::size_t(p)]);
      psi[id] = bf_[std::size_t(p)] * psi[id] + af_[std::size_t(p)] * (u[up] - u[id]) * ih;
    });
    visit([&](std::size_t id, int p) {
      const std::size_t up = shift(id, p, ip_[std::size_t(p)]);
      const std::size_t dn = shift(id, p, im_[std::size_t(p)]);
      const double dpsi = (psi[id] - psi[dn]) * ih;
      const double dw = (u[up] - 2.0 * u[id] + u[dn]) * ih * ih + dpsi;
      chi[id] = bn_[std::size_t(p)] * chi[id] + an_[std::size_t(p)] * dw;
      extra[id] += (dpsi + chi[id]) * h2;
    });
  }
}

void LeapfrogStepper::step(WaveState& s) const {
  // next overwrites prev: each node of u^{n+1} reads only its own u^{n-1}.
  if (pml_) {
    RealField extra;
    layer_update(s, extra);
    advance(s.prev, s.curr, s.prev, &extra);
  } else {
    advance(s.prev, s.curr, s.prev, nullptr);
  }
  s.prev.swap(s.curr);
  ++s.n;
}

WaveState LeapfrogStepper::start(const RealField& f, const RealField& h) const {
  WaveState s;
  s.dt = dt_;
  s.prev = f;
  RealField lf;
  apply_operator(f, lf);
  const RealField c2 = inv_c2_.inverse();
  s.curr = f + dt_ * h + 0.5 * dt_ * dt_ * (c2 * lf);
  if (pml_) s.aux.assign(6, RealField::Zero(f.size()));
  s.n = 1;
  return s;
}

double LeapfrogStepper::bilinear(const RealField& u, const RealField& v) const {
  const int n = g_.n;
  double acc = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const auto id = g_.index(i, j, k);
        const auto ex = g_.index(ip_[i], j, k), ey = g_.index(i, ip_[j], k),
                   ez = g_.index(i, j, ip_[k]);
        const double sx = unit_sigma_ ? 1.0 : sx_[id];
        const double sy = unit_sigma_ ? 1.0 : sy_[id];
        const double sz = unit_sigma_ ? 1.0 : sz_[id];
        acc += sx * (u[ex] - u[id]) * (v[ex] - v[id]) + sy * (u[ey] - u[id]) * (v[ey] - v[id]) +
               sz * (u[ez] - u[id]) * (v[ez] - v[id]);
      }
  return acc * g_.h;  // h^3 / h^2
}

double LeapfrogStepper::energy(const WaveState& s) const {
  const double kin = (inv_c2_ * (s.curr - s.prev).square()).sum() * g_.cell_volume() /
                     (dt_ * dt_);
  return kin + bilinear(s.curr, s.prev);
}

double discrete_energy(const LeapfrogStepper& st, const WaveState& s) {
  return st.energy(s);
}

namespace {

struct Observer {
  const Configuration& cfg;
  const SolverSettings& set;
  const BoundaryLayout& layout;
  double dt;
  int M;
  SimulationResult& res;
  IndexBox ibox;
  std::vector<double> snap_t, snap_eta;
  double e0 = 0;
  double ref_max = 0;

  double local_energy(const RealField& u, const RealField& v) const {
    const Grid& g = cfg.grid();
    double acc = 0;
    cfg.domain.omega.for_each([&](int i, int j, int k) {
      const auto id = g.index(i, j, k);
      acc += u[id] * u[id] + v[id] * v[id];
    });
    return acc * g.cell_volume();
  }

  void observe(const RealField& u, const RealField* prev, int n) {
    const Grid& g = cfg.grid();
    const double h = g.h;
    const std::size_t nb = layout.size();
    if (set.record_dataset) {
      double* out = res.dataset.data.data() + std::size_t(n) * nb * 2;
      for (std::size_t q = 0; q < nb; ++q) {
        const auto& nd = layout.nodes[q];
        const double a = u[Eigen::Index(nd.in)], b = u[Eigen::Index(nd.out)];
        out[2 * q] = 0.5 * (a + b);
        out[2 * q + 1] = nd.sigma_face * (b - a) / h;
      }
    }
    for (auto& tr : res.boundary) {
      const cplx w = transform_weight(set.rule, tr.s, dt, n, M);
      for (std::size_t q = 0; q < nb; ++q) {
        const auto& nd = layout.nodes[q];
        const double a = u[Eigen::Index(nd.in)], b = u[Eigen::Index(nd.out)];
        tr.u[q] += w * (0.5 * (a + b));
        tr.flux[q] += w * (nd.sigma_face * (b - a) / h);
      }
    }
    for (auto& tr : res.interior) {
      const cplx w = transform_weight(set.rule, tr.s, dt, n, M);
      ibox.for_each([&](int i, int j, int k) {
        const auto id = g.index(i, j, k);
        tr.values[id] += w * u[id];
      });
    }
    if (n % set.snapshot_interval == 0 || n == M) {
      double e;
      if (prev) e = local_energy(u, RealField((u - *prev) / dt));
      else e = local_energy(u, cfg.h);
      if (n == 0) e0 = e;
      snap_t.push_back(n * dt);
      snap_eta.push_back(e0 > 0 ? std::sqrt(e / e0) : 0.0);
      const double m = u.abs().maxCoeff();
      if (!u.allFinite() || (ref_max > 0 && m > set.blowup_factor * ref_max) ||
          (ref_max == 0 && m > 0))
        throw InstabilityError("leapfrog solution blew up at step " + std::to_string(n));
    }
  }
};

}  // namespace

SimulationResult simulate(const Configuration& cfg, const SolverSettings& set) {
  const double dmax = stable_dt(cfg);
  const double dt = set.dt > 0 ? set.dt : set.cfl * dmax;
  if (dt > dmax * (1 + 1e-12))
    throw InstabilityError("time step exceeds the leapfrog stability limit");
  if (set.snapshot_interval < 1) throw std::invalid_argument("snapshot_interval < 1");
  const int M = std::max(1, int(std::lround(set.T / dt)));
  const Grid& g = cfg.grid();

  SimulationResult res;
  res.dt = dt;
  res.steps = M;
  const BoundaryLayout layout = make_boundary_layout(cfg.domain, cfg.sigma);
  if (set.record_dataset) {
    const std::size_t bytes = (std::size_t(M) + 1) * layout.size() * 2 * sizeof(double);
    if (bytes > set.storage_budget)
      throw StorageError("boundary dataset needs " + std::to_string(bytes) +
                         " bytes, budget is " + std::to_string(set.storage_budget));
    res.dataset.data.assign((std::size_t(M) + 1) * layout.size() * 2, 0.0);
  }
  res.dataset.grid_n = g.n;
  res.dataset.h = g.h;
  res.dataset.dt = dt;
  res.dataset.steps = M;
  res.dataset.half_width = cfg.domain.half_width;
  res.dataset.layout = layout;
  for (cplx s : set.boundary_s) {
    TraceTransform tr;
    tr.s = s;
    tr.rule = set.rule;
    tr.dt = dt;
    tr.u.assign(layout.size(), 0.0);
    tr.flux.assign(layout.size(), 0.0);
    res.boundary.push_back(std::move(tr));
  }
  const IndexBox ibox = cfg.domain.omega.grown(1);
  for (cplx s : set.interior_s) {
    InteriorTransform tr;
    tr.s = s;
    tr.rule = set.rule;
    tr.dt = dt;
    tr.box = ibox;
    tr.values = ComplexField::Zero(Eigen::Index(g.size()));
    res.interior.push_back(std::move(tr));
  }

  Observer obs{cfg, set, layout, dt, M, res, ibox, {}, {}, 0, 0};
  obs.ref_max = std::max(cfg.f.abs().maxCoeff(), cfg.h.abs().maxCoeff() * std::max(1.0, set.T));

  LeapfrogStepper stepper(cfg, dt, set.absorbing);
  obs.observe(cfg.f, nullptr, 0);
  WaveState st = stepper.start(cfg.f, cfg.h);
  obs.observe(st.curr, &st.prev, 1);
  while (st.n < M) {
    stepper.step(st);
    obs.observe(st.curr, &st.prev, st.n);
  }
  res.decay = estimate_decay(std::move(obs.snap_t), std::move(obs.snap_eta),
                             set.decay_baseline);
  res.dataset.eta_final = res.decay.eta_final;
  res.final_state = std::move(st);
  return res;
}

}  // namespace pwinv
