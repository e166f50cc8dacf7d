#pragma once

#include "pwinv/cgo.hpp"
#include "pwinv/forward.hpp"
#include "pwinv/spectral.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pwinv {

/// `kind` is "coverage" or "invalid-wave".
struct IdentityError : std::runtime_error {
  std::string kind;
  IdentityError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

struct PairingResult {
  cplx value = 0.0;
  double quadrature_error = 0.0;  // estimate, see each evaluator
  double tail_bound = 0.0;
  std::vector<std::pair<std::string, cplx>> components;

  cplx component_sum() const;
  cplx component(const std::string& name) const;
};

struct TimePairingOptions {
  double min_tau_T = 8.0;       // coverage precondition tau T >= min_tau_T
  double max_tail_ratio = 0.1;  // coverage error when tail > ratio |value|
  /// Skip the analytic-trace comparison used as the quadrature estimate.
  bool estimate_quadrature = true;
};

/// Laplace transform sum_n w_n exp(-s t_n)(u, sigma du/dnu) of a stored
/// dataset.
TraceTransform transform_traces(const BoundaryDataset& data, cplx s,
                                TimeRule rule = TimeRule::trapezoid);

/// Boundary transforms at real s = tau with what the pairing needs besides
/// the wave (layout, horizon, last traces for the tail bound).
struct TimeTransformSet {
  std::vector<TraceTransform> traces;
  BoundaryLayout layout;
  int grid_n = 0;
  double T = 0.0, dt = 0.0;
  std::vector<double> u_last, flux_last;

  static TimeTransformSet from_dataset(const BoundaryDataset& data, const std::vector<double>& taus);
  /// Uses the real entries of sim.boundary.
  static TimeTransformSet from_simulation(const SimulationResult& sim);
  std::vector<double> taus() const;
  const TraceTransform& at(double tau) const;  // throws IdentityError("coverage")
  PairingResult pair(const TestWave& wave, const TimePairingOptions& opt = {}) const;
};

/// int_0^T int_dOmega (u d_nu w - sigma d_nu u w) for w = exp(i rho0 t) W with
/// rho0 = i tau: the time integral is the transform of the traces at s = tau.
PairingResult boundary_pairing_time(const BoundaryDataset& data, const TestWave& wave,
                                    const TimePairingOptions& opt = {});
/// Same from the on-the-fly transform boundary[index] of a simulation
/// (its s must equal -i rho0).
PairingResult boundary_pairing_time(const SimulationResult& sim, std::size_t index,
                                    const TestWave& wave, const TimePairingOptions& opt = {});

/// -int (f/c^2) d_t w(., 0) + int (h/c^2) w(., 0) over the nodes of Omega.
PairingResult interior_source_pairing(const Configuration& cfg, const TestWave& wave);

/// Itemized two-configuration identity with w solving the cfgA equation and
/// the interior transform of the cfgB solution (simB.interior[index], at
/// s = -i rho0):
///   spacetime  q2 int (1/c~^2 - 1/c^2) U~ W
///   f_term     s_src int (f/c^2 - f~/c~^2) W
///   h_term     int (h/c^2 - h~/c~^2) W
///   sigma_term int (sigma~ - sigma) grad U~ . grad W
/// where (q2, s_src) are the time-rule coefficients of the transform. The sum
/// equals P_A - P_B (boundary pairings of the two datasets).
PairingResult time_identity_terms(const Configuration& cfgA, const Configuration& cfgB,
                                  const SimulationResult& simB, std::size_t index,
                                  const TestWave& wave);

/// int_dOmega (u-hat d_nu v - sigma d_nu u-hat v) for a plane wave v.
PairingResult boundary_pairing_freq(const FrequencyField& freq, const BoundaryLayout& layout,
                                    const Grid& g, const TestWave& wave);

/// Green decomposition B = source - omega2 int (1 - 1/c^2) R v
///                         - int (sigma - 1) grad u-hat . grad v.
struct FreqIdentityResult {
  PairingResult pairing;  // B
  cplx source = 0.0;      // s_src int f v + int h v
  cplx remainder = 0.0;   // omega2 int (1 - 1/c^2) R v
  cplx gradient = 0.0;    // int (sigma - 1) grad u-hat . grad v (edges inside Omega)
  double residual = 0.0;  // |B - (source - remainder - gradient)|
  double relative = 0.0;  // residual / |B|
  cplx decomposition() const { return source - remainder - gradient; }
};

/// Needs freq.values on Omega grown by one node (interior transform or
/// Helmholtz solve).
FreqIdentityResult freq_identity_residual(const Configuration& cfg, const FrequencyField& freq,
                                          const TestWave& wave);

/// Discrete bilinear form sum over edges with both ends in `box` of
/// coef_e D u D v h^3, coef_e the edge average of `coef`.
cplx edge_form(const Grid& g, const IndexBox& box, const RealField& coef, const ComplexField& u,
               const ComplexField& v);

}  // namespace pwinv
