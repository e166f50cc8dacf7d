#pragma once

#include "pwinv/config.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwinv {

struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StorageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Time quadrature used for transforms of sampled histories.
/// `filon` integrates the piecewise-linear interpolant exactly; `trapezoid`
/// is the discrete-time transform that the leapfrog recursion satisfies
/// exactly.
enum class TimeRule { filon, trapezoid };

/// Weight of sample n (of 0..M) in the approximation of
/// int_0^{M dt} g(t) exp(-s t) dt.
cplx transform_weight(TimeRule rule, cplx s, double dt, int n, int M);

/// One face cell of the boundary of Omega: the last node inside, its outside
/// neighbour, and the outward normal axis/sign.
struct FaceNode {
  std::size_t in = 0, out = 0;
  int axis = 0;
  int sign = 1;
  double x = 0, y = 0, z = 0;
  double sigma_face = 1.0;
};

struct BoundaryLayout {
  std::vector<FaceNode> nodes;
  double area = 0.0;  // h^2 per node
  std::size_t size() const { return nodes.size(); }
};

BoundaryLayout make_boundary_layout(const Domain& dom, const RealField& sigma);

/// Face average and outward normal difference of a nodal field.
template <class Scalar>
void face_traces(const BoundaryLayout& L, const Field<Scalar>& u, double h,
                 std::vector<Scalar>& value, std::vector<Scalar>& normal) {
  value.resize(L.size());
  normal.resize(L.size());
  for (std::size_t q = 0; q < L.size(); ++q) {
    const auto& nd = L.nodes[q];
    const Scalar a = u[Eigen::Index(nd.in)], b = u[Eigen::Index(nd.out)];
    value[q] = Scalar(0.5) * (a + b);
    normal[q] = (b - a) / h;
  }
}

/// Boundary observations (u, sigma du/dnu) on the faces of Omega at t_n = n dt.
struct BoundaryDataset {
  int grid_n = 0;
  double h = 0, dt = 0;
  int steps = 0;  // frames 0..steps
  double half_width = 0;
  BoundaryLayout layout;
  std::vector<double> data;  // [frame][node][u, flux]
  double eta_final = 0;
  std::string scenario_hash, code_version;

  double T() const { return steps * dt; }
  std::size_t frames() const { return std::size_t(steps) + 1; }
  double u(int n, std::size_t q) const { return data[(std::size_t(n) * layout.size() + q) * 2]; }
  double flux(int n, std::size_t q) const { return data[(std::size_t(n) * layout.size() + q) * 2 + 1]; }
};

/// Transformed boundary traces: sum_n w_n exp(-s t_n) (u, flux).
struct TraceTransform {
  cplx s;
  TimeRule rule = TimeRule::trapezoid;
  double dt = 0;
  std::vector<cplx> u, flux;
};

/// Transformed interior history on a box (zero elsewhere).
struct InteriorTransform {
  cplx s;
  TimeRule rule = TimeRule::trapezoid;
  double dt = 0;
  IndexBox box;
  ComplexField values;
};

struct DecayEstimate {
  std::vector<double> t, eta;
  double integral = 0;
  double eta_final = 0;
  bool eventually_decreasing = false;
  bool slow_decay = false;
};

/// eta sampled at times t; `baseline` is the integral for a homogeneous
/// reference (slow decay when exceeded fivefold; ignored if <= 0).
DecayEstimate estimate_decay(std::vector<double> t, std::vector<double> eta,
                             double baseline = 0.0);

struct SolverSettings {
  double cfl = 0.9;
  double dt = 0.0;  // overrides cfl when positive
  double T = 10.0;
  bool absorbing = true;
  int snapshot_interval = 10;
  std::size_t storage_budget = std::size_t(3) << 30;
  bool record_dataset = true;
  std::vector<cplx> boundary_s;
  std::vector<cplx> interior_s;
  TimeRule rule = TimeRule::trapezoid;
  double blowup_factor = 1e6;
  double decay_baseline = 0.0;
};

/// Largest stable leapfrog step for the configuration.
double stable_dt(const Configuration& cfg);

struct WaveState {
  RealField prev, curr;  // u^{n-1}, u^n
  std::vector<RealField> aux;  // absorbing-layer memories
  int n = 0;
  double dt = 0;
  double t() const { return n * dt; }
};

/// Leapfrog for (1/c^2) u_tt = div(sigma grad u) on the periodic grid. With
/// the absorbing layer enabled, the outer cells carry a convolutional
/// perfectly matched layer; the scheme is untouched wherever the layer
/// profile vanishes.
class LeapfrogStepper {
 public:
  LeapfrogStepper(const Configuration& cfg, double dt, bool absorbing);

  /// (L u)(x) = div_h(sigma grad_h u).
  void apply_operator(const RealField& u, RealField& out) const;
  /// u^{n+1} from (u^{n-1}, u^n); layer-free steppers only.
  void step(const RealField& prev, const RealField& curr, RealField& next) const;
  /// Advances in place.
  void step(WaveState& s) const;
  /// State holding (u^0, u^1) from the initial data.
  WaveState start(const RealField& f, const RealField& h) const;
  /// sum (1/c^2)((u^n-u^{n-1})/dt)^2 + a(u^n, u^{n-1}), the quantity the
  /// undamped scheme conserves.
  double energy(const WaveState& s) const;
  /// a(u, v) = sum over edges sigma D u D v h^3.
  double bilinear(const RealField& u, const RealField& v) const;

  double dt() const { return dt_; }
  const Grid& grid() const { return g_; }

 private:
  void advance(const RealField& prev, const RealField& curr, RealField& next,
               const RealField* extra) const;
  void layer_update(WaveState& s, RealField& extra) const;

  Grid g_;
  double dt_;
  bool unit_sigma_;
  bool pml_ = false;
  RealField c2dt2_, inv_c2_, sx_, sy_, sz_;
  std::vector<int> ip_, im_;
  // memory recursions at nodes and at faces i + 1/2
  std::vector<double> bn_, an_, bf_, af_;
  std::vector<int> slab_;
  std::vector<bool> in_slab_;
};

double discrete_energy(const LeapfrogStepper& stepper, const WaveState& s);

struct SimulationResult {
  BoundaryDataset dataset;  // empty data unless recorded
  std::vector<TraceTransform> boundary;
  std::vector<InteriorTransform> interior;
  DecayEstimate decay;
  double dt = 0;
  int steps = 0;
  WaveState final_state;
};

SimulationResult simulate(const Configuration& cfg, const SolverSettings& s);

}  // namespace pwinv
