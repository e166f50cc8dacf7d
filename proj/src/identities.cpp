#include "pwinv/identities.hpp"

#include <cmath>

namespace pwinv {
namespace {

Domain grid_domain(int n) {
  Domain d;
  d.grid = Grid(n);
  return d;
}

void require_time_wave(const TestWave& w) {
  if (w.kind != TestWave::Kind::time_cgo)
    throw IdentityError("invalid-wave", "a time-domain test wave is required");
  if (!(w.rho0.imag() > 0) || std::abs(w.rho0.real()) > 1e-14)
    throw IdentityError("invalid-wave", "rho0 must be i*tau with tau > 0");
}

void require_plane_wave(const TestWave& w) {
  if (w.kind != TestWave::Kind::plane)
    throw IdentityError("invalid-wave", "a frequency-domain plane wave is required");
}

// sum_q area (U sigma_f dW - F W) split into its two terms.
std::pair<cplx, cplx> surface_terms(const BoundaryLayout& L, const std::vector<cplx>& U,
                                    const std::vector<cplx>& F, const WaveTraces& w,
                                    bool weight_sigma) {
  cplx a = 0, b = 0;
  for (std::size_t q = 0; q < L.size(); ++q) {
    const double s = weight_sigma ? L.nodes[q].sigma_face : 1.0;
    a += U[q] * s * w.normal[q];
    b -= F[q] * w.value[q];
  }
  return {a * L.area, b * L.area};
}

PairingResult time_pairing(const TraceTransform& tr, const BoundaryLayout& L, int n, double T,
                           const std::vector<double>& u_last, const std::vector<double>& f_last,
                           const TestWave& wave, const TimePairingOptions& opt) {
  require_time_wave(wave);
  const double tau = wave.rho0.imag();
  if (std::abs(tr.s - cplx(tau, 0)) > 1e-12 * std::max(1.0, tau))
    throw IdentityError("invalid-wave", "transform variable does not match the wave");
  if (tau * T < opt.min_tau_T)
    throw IdentityError("coverage", "tau*T = " + std::to_string(tau * T) + " below " +
                                        std::to_string(opt.min_tau_T));
  const Domain d = grid_domain(n);
  const WaveTraces w = wave.traces(d, L, TraceMode::nodal);
  PairingResult r;
  const auto [a, b] = surface_terms(L, tr.u, tr.flux, w, true);
  r.components = {{"u_dnu_w", a}, {"flux_w", b}};
  r.value = a + b;
  if (opt.estimate_quadrature) {
    const WaveTraces wa = wave.traces(d, L, TraceMode::analytic);
    const auto [a2, b2] = surface_terms(L, tr.u, tr.flux, wa, true);
    r.quadrature_error = std::abs(a2 + b2 - r.value);
  }
  // Remaining window mass beyond T, with the instantaneous pairing held at its
  // last level.
  cplx m = 0;
  for (std::size_t q = 0; q < L.size(); ++q)
    m += u_last[q] * L.nodes[q].sigma_face * w.normal[q] - f_last[q] * w.value[q];
  r.tail_bound = std::abs(m) * L.area * std::exp(-tau * T) / tau;
  if (r.tail_bound > opt.max_tail_ratio * std::abs(r.value) && r.tail_bound > 0)
    throw IdentityError("coverage", "tail bound " + std::to_string(r.tail_bound) +
                                        " exceeds the allowed fraction of |pairing| " +
                                        std::to_string(std::abs(r.value)));
  return r;
}

}  // namespace

cplx PairingResult::component_sum() const {
  cplx s = 0;
  for (const auto& c : components) s += c.second;
  return s;
}

cplx PairingResult::component(const std::string& name) const {
  for (const auto& c : components)
    if (c.first == name) return c.second;
  throw std::out_of_range("no pairing component '" + name + "'");
}

TraceTransform transform_traces(const BoundaryDataset& data, cplx s, TimeRule rule) {
  TraceTransform tr;
  tr.s = s;
  tr.rule = rule;
  tr.dt = data.dt;
  const std::size_t m = data.layout.size();
  tr.u.assign(m, 0.0);
  tr.flux.assign(m, 0.0);
  for (int n = 0; n <= data.steps; ++n) {
    const cplx w = transform_weight(rule, s, data.dt, n, data.steps);
    const double* row = data.data.data() + std::size_t(n) * m * 2;
    for (std::size_t q = 0; q < m; ++q) {
      tr.u[q] += w * row[2 * q];
      tr.flux[q] += w * row[2 * q + 1];
    }
  }
  return tr;
}

TimeTransformSet TimeTransformSet::from_dataset(const BoundaryDataset& data,
                                                const std::vector<double>& taus) {
  TimeTransformSet t;
  for (double tau : taus) t.traces.push_back(transform_traces(data, cplx(tau, 0)));
  t.layout = data.layout;
  t.grid_n = data.grid_n;
  t.T = data.T();
  t.dt = data.dt;
  const std::size_t m = data.layout.size();
  t.u_last.assign(m, 0.0);
  t.flux_last.assign(m, 0.0);
  if (!data.data.empty())
    for (std::size_t q = 0; q < m; ++q) {
      t.u_last[q] = data.u(data.steps, q);
      t.flux_last[q] = data.flux(data.steps, q);
    }
  return t;
}

TimeTransformSet TimeTransformSet::from_simulation(const SimulationResult& sim) {
  TimeTransformSet t;
  for (const auto& tr : sim.boundary)
    if (tr.s.imag() == 0.0 && tr.s.real() > 0) t.traces.push_back(tr);
  t.layout = sim.dataset.layout;
  t.grid_n = sim.dataset.grid_n;
  t.T = sim.steps * sim.dt;
  t.dt = sim.dt;
  face_traces(t.layout, sim.final_state.curr, sim.dataset.h, t.u_last, t.flux_last);
  for (std::size_t q = 0; q < t.layout.size(); ++q) t.flux_last[q] *= t.layout.nodes[q].sigma_face;
  return t;
}

std::vector<double> TimeTransformSet::taus() const {
  std::vector<double> v;
  for (const auto& tr : traces) v.push_back(tr.s.real());
  return v;
}

const TraceTransform& TimeTransformSet::at(double tau) const {
  for (const auto& tr : traces)
    if (std::abs(tr.s.real() - tau) <= 1e-12 * std::max(1.0, tau)) return tr;
  throw IdentityError("coverage", "no boundary transform at tau = " + std::to_string(tau));
}

PairingResult TimeTransformSet::pair(const TestWave& wave, const TimePairingOptions& opt) const {
  require_time_wave(wave);
  return time_pairing(at(wave.rho0.imag()), layout, grid_n, T, u_last, flux_last, wave, opt);
}

PairingResult boundary_pairing_time(const BoundaryDataset& data, const TestWave& wave,
                                    const TimePairingOptions& opt) {
  require_time_wave(wave);
  return TimeTransformSet::from_dataset(data, {wave.rho0.imag()}).pair(wave, opt);
}

PairingResult boundary_pairing_time(const SimulationResult& sim, std::size_t index,
                                    const TestWave& wave, const TimePairingOptions& opt) {
  require_time_wave(wave);
  TimeTransformSet t = TimeTransformSet::from_simulation(sim);
  t.traces = {sim.boundary.at(index)};
  return t.pair(wave, opt);
}

PairingResult interior_source_pairing(const Configuration& cfg, const TestWave& wave) {
  require_time_wave(wave);
  const Grid& g = cfg.grid();
  const ComplexField W = wave.spatial(g);
  const RealField ic2 = cfg.inv_c2();
  const cplx rate = cplx(0, 1) * wave.rho0;  // d_t w(., 0) = i rho0 W
  const cplx fterm = -rate * box_integral(ComplexField(cfg.f * ic2 * W), g, cfg.domain.omega);
  const cplx hterm = box_integral(ComplexField(cfg.h * ic2 * W), g, cfg.domain.omega);
  PairingResult r;
  r.components = {{"f_term", fterm}, {"h_term", hterm}};
  r.value = fterm + hterm;
  return r;
}

cplx edge_form(const Grid& g, const IndexBox& box, const RealField& coef, const ComplexField& u,
               const ComplexField& v) {
  cplx acc = 0;
  const std::array<std::array<int, 3>, 3> e{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  box.for_each([&](int i, int j, int k) {
    const auto a = g.index(i, j, k);
    for (const auto& d : e) {
      const int i2 = i + d[0], j2 = j + d[1], k2 = k + d[2];
      if (!box.contains(i2, j2, k2)) continue;
      const auto b = g.index(i2, j2, k2);
      const double c = 0.5 * (coef[a] + coef[b]);
      if (c == 0.0) continue;
      acc += c * (u[b] - u[a]) * (v[b] - v[a]);
    }
  });
  return acc * g.h;  // (1/h^2) * h^3
}

PairingResult time_identity_terms(const Configuration& A, const Configuration& B,
                                  const SimulationResult& simB, std::size_t index,
                                  const TestWave& wave) {
  require_time_wave(wave);
  const InteriorTransform& it = simB.interior.at(index);
  const double tau = wave.rho0.imag();
  if (std::abs(it.s - cplx(tau, 0)) > 1e-12 * std::max(1.0, tau))
    throw IdentityError("invalid-wave", "interior transform variable does not match the wave");
  const IndexBox& ob = A.domain.omega;
  if (!it.box.contains(ob.lo[0], ob.lo[1], ob.lo[2]) || !it.box.contains(ob.hi[0], ob.hi[1], ob.hi[2]))
    throw IdentityError("coverage", "interior transform does not cover omega");
  const Grid& g = A.grid();
  const IndexBox& om = A.domain.omega;
  const auto [q2, ssrc] = effective_coefficients(it.rule, it.s, it.dt);
  const ComplexField W = wave.spatial(g);
  const RealField ia = A.inv_c2(), ib = B.inv_c2();

  PairingResult r;
  const cplx st = q2 * box_integral(ComplexField((ib - ia) * it.values * W), g, om);
  const cplx ft = ssrc * box_integral(ComplexField((A.f * ia - B.f * ib) * W), g, om);
  const cplx ht = box_integral(ComplexField((A.h * ia - B.h * ib) * W), g, om);
  const cplx sg = edge_form(g, om, RealField(B.sigma - A.sigma), it.values, W);
  r.components = {{"spacetime", st}, {"f_term", ft}, {"h_term", ht}, {"sigma_term", sg}};
  r.value = st + ft + ht + sg;
  return r;
}

PairingResult boundary_pairing_freq(const FrequencyField& F, const BoundaryLayout& L,
                                    const Grid& g, const TestWave& wave) {
  require_plane_wave(wave);
  if (F.u.size() != L.size()) throw IdentityError("coverage", "trace count mismatch");
  const Domain d = grid_domain(g.n);
  const WaveTraces w = wave.traces(d, L, TraceMode::nodal);
  PairingResult r;
  const auto [a, b] = surface_terms(L, F.u, F.flux, w, false);
  r.components = {{"u_dnu_v", a}, {"flux_v", b}};
  r.value = a + b;
  const WaveTraces wa = wave.traces(d, L, TraceMode::analytic);
  const auto [a2, b2] = surface_terms(L, F.u, F.flux, wa, false);
  r.quadrature_error = std::abs(a2 + b2 - r.value);
  return r;
}

FreqIdentityResult freq_identity_residual(const Configuration& cfg, const FrequencyField& F,
                                          const TestWave& wave) {
  require_plane_wave(wave);
  if (!F.has_values()) throw IdentityError("coverage", "interior field values are required");
  const Grid& g = cfg.grid();
  const IndexBox& om = cfg.domain.omega;
  const BoundaryLayout L = make_boundary_layout(cfg.domain, cfg.sigma);
  FreqIdentityResult out;
  out.pairing = boundary_pairing_freq(F, L, g, wave);
  const ComplexField v = wave.spatial(g);
  out.source = box_integral(ComplexField((F.s_src * cfg.f + cfg.h) * v), g, om);
  const RemainderField R = remainder(F, cfg);
  out.remainder =
      F.omega2() * box_integral(ComplexField((1.0 - cfg.inv_c2()) * R.values * v), g, om);
  out.gradient = edge_form(g, om, RealField(cfg.sigma - 1.0), F.values, v);
  out.residual = std::abs(out.pairing.value - out.decomposition());
  const double scale = std::abs(out.pairing.value);
  out.relative = scale > 0 ? out.residual / scale : out.residual;
  return out;
}

}  // namespace pwinv
