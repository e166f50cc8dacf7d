#pragma once

#include "pwinv/config.hpp"
#include "pwinv/forward.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pwinv {

/// `kind` is "aliasing", "pollution", "non-convergence" or "insufficient-span".
struct SpectralError : std::runtime_error {
  std::string kind;
  SpectralError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

/// Half-line transform window: hard cut at T, or exp(-eps t) with eps = 3/T.
enum class Window { hard_cut, exponential_taper };

/// Laplace variable s with exp(-s t) = exp(-i k t) times the window factor.
cplx laplace_variable(double k, Window w, double T);

/// Coefficients (s2, s_src) of -div(sigma grad u) + s2 u/c^2 = (s_src f + h)/c^2
/// satisfied by the transform: (s^2, s) for continuous time and the Filon rule,
/// the discrete-time pair for the trapezoid transform of leapfrog data.
std::pair<cplx, cplx> effective_coefficients(TimeRule rule, cplx s, double dt);

/// Largest k with dt k <= 0.5.
inline double max_resolved_frequency(double dt) { return 0.5 / dt; }
void check_sampling(double k, double dt);

/// u-hat(., k) with its Cauchy traces on the faces of Omega.
struct FrequencyField {
  double k = 0.0;
  cplx s = 0.0;
  cplx s2 = 0.0, s_src = 0.0;
  TimeRule rule = TimeRule::filon;
  double dt = 0.0;           // 0 for the Helmholtz solver
  IndexBox box;              // support of `values`
  ComplexField values;       // full grid, zero outside `box`
  std::vector<cplx> u, flux; // on the dataset layout
  double tail_bound = 0.0;   // relative, see temporal_fourier
  bool tail_warning = false;
  int iterations = 0;        // Helmholtz only
  double residual = 0.0;     // Helmholtz only: relative residual

  /// -s2 (equals k^2 in the continuous case).
  cplx omega2() const { return -s2; }
  bool has_values() const { return values.size() > 0; }
};

/// Transform of one sampled scalar history.
cplx transform_series(const std::vector<double>& samples, double dt, cplx s, TimeRule rule);

/// Transforms the boundary dataset; the tail bound uses the decay profile
/// when given.
FrequencyField temporal_fourier(const BoundaryDataset& data, double k, Window w, TimeRule rule,
                                const DecayEstimate* decay = nullptr);
/// Transforms a sampled interior history (frames at t_n = n dt).
FrequencyField temporal_fourier(const std::vector<RealField>& frames, const Grid& g, double dt,
                                double k, Window w, TimeRule rule);
/// Requests the on-the-fly transforms simulate() needs for `ks`.
void request_frequencies(SolverSettings& s, const std::vector<double>& ks, Window w,
                         bool interior = true);
/// Assembles the i-th requested frequency of a simulation.
FrequencyField frequency_field(const SimulationResult& r, std::size_t i);

struct HelmholtzSettings {
  double tolerance = 1e-8;
  int max_iterations = 3000;
  int restart = 40;
  double shift = 0.5;        // complex shift of the preconditioner
  double max_kh = 0.8;       // pollution guard
  bool pollution_guard = true;
  TimeRule rule = TimeRule::filon;  // trapezoid: solve the discrete-time pair
  double dt = 0.0;
};

/// Solves -div(sigma grad u) + s2 u/c^2 = (s_src f + h)/c^2 on the periodic box
/// with complex coordinate stretching in the absorbing layer.
FrequencyField helmholtz_solve(const Configuration& cfg, cplx s,
                               const HelmholtzSettings& set = {});
inline FrequencyField helmholtz_solve(const Configuration& cfg, double k,
                                      const HelmholtzSettings& set = {}) {
  return helmholtz_solve(cfg, cplx(0, k), set);
}

/// Stretched operator -div(sigma grad .) + s2/c^2 applied once (used for
/// residual checks).
ComplexField apply_helmholtz(const Configuration& cfg, cplx s, cplx s2, const ComplexField& u);

/// (c^2 div(sigma grad))^j applied to f (which = 'f') or h (which = 'h').
RealField ansatz_term(const Configuration& cfg, int j, char which);

/// R = u-hat + (s_src f + h)/omega2 on Omega.
struct RemainderField {
  double k = 0.0;
  ComplexField values;  // full grid, zero outside Omega
  double l2 = 0.0, linf = 0.0;
};
RemainderField remainder(const FrequencyField& freq, const Configuration& cfg);

struct DecayFit {
  double slope = 0.0, intercept = 0.0, halfwidth = 0.0;
  std::vector<std::pair<double, double>> samples;
};
/// Least-squares line through (log k, log value); needs >= 4 samples with
/// strictly increasing k spanning a factor >= 3.
DecayFit fit_decay_exponent(std::vector<std::pair<double, double>> samples);

/// Norm of the Helmholtz forcing (s_src f + h)/c^2 over Omega.
double forcing_norm(const FrequencyField& freq, const Configuration& cfg);

}  // namespace pwinv
