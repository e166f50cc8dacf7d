#pragma once

#include "pwinv/cgo.hpp"
#include "pwinv/identities.hpp"
#include "pwinv/spectral.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwinv {

/// `kind` is "degenerate-divisor", "k-band", "sign" or "invalid-input".
struct InversionError : std::runtime_error {
  std::string kind;
  InversionError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

/// One transverse mode: raw pairing estimates per parameter (tau or k), the
/// extrapolated value and, when ground truth is attached, the matching
/// volume-quadrature values.
struct ModeEntry {
  double m1 = 0, m2 = 0;
  std::vector<double> params;      // tau list or k list
  std::vector<cplx> raw;           // before dividing by the divisor
  std::vector<cplx> divisor;       // per parameter
  cplx extrapolated = 0.0;         // limit of raw (quotient) or transverse mode (source)
  cplx transverse = 0.0;           // extrapolated / divisor (quotient) or fitted mode (source)
  bool warning = false;            // raw values non-monotone in the extrapolation variable
  bool has_truth = false;
  std::vector<cplx> truth_raw;     // ground-truth raw value per parameter
  cplx truth_limit = 0.0;          // ground-truth extrapolated / transverse value
  bool oracle = false;             // flagged verification-only values below
  std::vector<cplx> oracle_raw, oracle_truth;
};

struct ModeTable {
  std::string lattice;   // "rho2 in Z-1/2" or "integer"
  std::string divisor;   // description of the longitudinal divisor
  std::vector<ModeEntry> entries;
  const ModeEntry& find(double m1, double m2) const;
  /// rho1, rho2, tau_or_k, raw_re, raw_im, extrap_re, extrap_im, truth_re, truth_im
  std::string csv() const;
};

/// Richardson extrapolation to tau = 0 of values assumed polynomial in tau^2
/// (Lagrange through all nodes).
cplx richardson_tau2(const std::vector<double>& taus, const std::vector<cplx>& values);

struct QuotientOptions {
  std::vector<double> taus{0.05, 0.1};
  int mode_box = 6;                   // |rho1| <= box, |rho2| <= box
  Symbol symbol = Symbol::grid;       // phase convention of the bare exponential
  bool oracle = false;                // verification runs only (needs the true c)
  double degeneracy = 1e-8;           // |divisor| / int |phi| exp(-kappa s)
  TimePairingOptions pairing;
};

/// Blind estimate of int g exp(i rho'.x), g = f/c^2, from the boundary
/// transforms at each tau (pairing / tau), extrapolated in tau^2. `truth`
/// attaches ground truth (and, with opt.oracle, the corrected-wave values).
ModeEntry recover_quotient_mode(const TimeTransformSet& data, double rho1, double rho2,
                                const QuotientOptions& opt = {},
                                const Configuration* truth = nullptr);

/// int phi(s) exp(-kappa s) ds on the x3 grid.
cplx quotient_divisor(const Grid& g, const Eigen::ArrayXd& phi, double kappa);

struct QuotientReconstruction {
  ModeTable table;
  Eigen::ArrayXd q0;  // n*n transverse field, x1 fastest
  bool has_truth = false;
  double rel_l2 = 0.0, max_err = 0.0;
  QuotientOptions options;
};

/// q0 from the modes in the box divided by the phi divisors, assembled on the
/// half-integer lattice. Throws InversionError("degenerate-divisor") naming
/// the first kappa whose divisor falls below the threshold.
QuotientReconstruction recover_q0(const TimeTransformSet& data, const Eigen::ArrayXd& phi,
                                  const QuotientOptions& opt = {},
                                  const Configuration* truth = nullptr);

struct SourceOptions {
  int mode_box = 6;              // |m1|, |m2| <= box
  double degeneracy = 1e-12;     // |divisor| / int |phi~|
  bool subtract_h = false;       // fit (ik) a + b instead of a + b/k^2
  bool weighted = true;          // weights |divisor|^2 in the fit
  /// grid: xi3 solves the 7-point dispersion relation at omega2 of each
  /// frequency field, so v is an exact discrete solution; continuum:
  /// xi3 = sqrt(k^2 - |m|^2).
  Symbol symbol = Symbol::grid;
};

/// B(xi, k)/(s_src) for xi = (m1, m2, xi3) (see SourceOptions::symbol) per frequency
/// field, divided by the nodal sum of phi~ exp(i xi3 s) h and fitted as
/// a + b/k^2.
ModeEntry recover_f_mode(const std::vector<FrequencyField>& freqs, const BoundaryLayout& layout,
                         const Grid& g, int m1, int m2, const Eigen::ArrayXd& phi_tilde,
                         const SourceOptions& opt = {}, const Configuration* truth = nullptr);

struct SourceReconstruction {
  ModeTable table;
  RealField f;
  Eigen::ArrayXd p;  // transverse factor, n*n
  bool has_truth = false;
  double rel_l2 = 0.0, max_err = 0.0;
  /// Slope of |raw - truth| against k per mode (modes with >= 4 usable k).
  std::vector<std::pair<std::pair<int, int>, DecayFit>> error_fits;
};

SourceReconstruction recover_f(const std::vector<FrequencyField>& freqs,
                               const BoundaryLayout& layout, const Grid& g,
                               const Eigen::ArrayXd& phi_tilde, const SourceOptions& opt = {},
                               const Configuration* truth = nullptr);

struct SpeedReconstruction {
  RealField c;
  std::vector<bool> mask;
  std::size_t mask_cells = 0, clamped = 0;
  bool has_truth = false;
  double rel_l2 = 0.0, max_err = 0.0;  // over the mask
};

/// c = sqrt(f / q) on {|f| >= theta max |f|}, 1 elsewhere, clamped to
/// [c_min/2, 2 c_max]; throws InversionError("sign") with the cell count when
/// f/q < 0 somewhere on the mask.
SpeedReconstruction recover_c(const RealField& f_rec, const RealField& q_rec, double theta,
                              const Bounds& bounds = {}, const Configuration* truth = nullptr);

/// (2 pi)^-2 sum of transverse * exp(-i(m1 x1 + m2 x2)) over the table, real
/// part, sampled on g (any resolution).
Eigen::ArrayXd synthesize_transverse(const ModeTable& table, const Grid& g);

/// Lifts a transverse n*n field by a longitudinal profile.
RealField lift_separated(const Grid& g, const Eigen::ArrayXd& transverse,
                         const Eigen::ArrayXd& longitudinal);

}  // namespace pwinv
