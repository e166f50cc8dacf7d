#pragma once

#include "pwinv/grid.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwinv {

/// Raised for an inadmissible configuration. `kind` is one of
/// "support-violation", "bounds-violation", "grid-admissibility",
/// "descriptor".
struct ConfigError : std::runtime_error {
  std::string kind;
  ConfigError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

struct SpongeSettings {
  int cells = 10;
  double strength = 0.0;  // 0 selects a default from the layer width
  int power = 2;
  double alpha = 0.0;  // frequency shift of the layer stretch
};

/// Periodic box Q = [-pi, pi)^3 with an absorbing layer in its outer cells
/// and a box Omega whose faces sit half a cell outside its extreme nodes.
struct Domain {
  Grid grid;
  double half_width = 0.0;
  IndexBox omega;
  SpongeSettings sponge;

  static Domain make(int n, double half_width, SpongeSettings sponge = {});

  /// Face coordinate of Omega along `axis`; side 0 is the low face.
  double face(int axis, int side) const;
  /// Depth into the absorbing layer in [0, 1] for node index i.
  double layer_depth(int i) const;
  double gamma_max() const;
  /// Damping field gamma(x) (zero outside the layer).
  RealField damping() const;
  /// Per-axis damping gamma_a(x_a) for node index i.
  double gamma_axis(int i) const;
  /// Layer profile at a fractional index (faces sit at i + 1/2).
  double layer_profile(double p) const;
  bool is_interior_node(int i, int j, int k) const {
    return omega.contains(i, j, k);
  }
};

struct Bounds {
  double c_min = 0.5, c_max = 2.0;
  double sigma_min = 0.5, sigma_max = 2.0;
};

/// g(x) = transverse(x1, x2) * longitudinal(x3).
struct SeparatedProfile {
  int axis = 2;
  Eigen::ArrayXd transverse;    // n*n samples, x1 fastest
  Eigen::ArrayXd longitudinal;  // n samples along x3
  std::function<double(double, double)> transverse_fn;
  std::function<double(double)> longitudinal_fn;

  RealField lift(const Grid& g) const;
};

struct Configuration {
  std::string name;
  Domain domain;
  RealField c, sigma, f, h;
  Bounds bounds;
  std::optional<SeparatedProfile> quotient;  // f / c^2 = q0 (x) phi
  std::optional<SeparatedProfile> source;    // f = p (x) phi~
  std::string descriptor;                    // canonical JSON text

  const Grid& grid() const { return domain.grid; }
  bool sigma_is_unity() const;
  bool h_is_zero() const;
  RealField inv_c2() const { return (c * c).inverse(); }
};

struct AdmissibilityReport {
  bool bounds_ok = true;
  bool support_ok = true;
  bool margin_ok = true;
  bool separated_ok = true;
  double c_min = 0, c_max = 0, sigma_min = 0, sigma_max = 0;
  std::vector<std::string> violations;
  bool ok() const { return bounds_ok && support_ok && margin_ok && separated_ok; }
};

AdmissibilityReport check_admissibility(const Configuration& cfg);

/// Builds a configuration from a JSON phantom descriptor (see README).
/// Throws ConfigError when the result is inadmissible.
Configuration build_phantom(const std::string& descriptor_json);

/// Homogeneous medium with the given initial data.
Configuration make_configuration(const Domain& dom, RealField c, RealField sigma,
                                 RealField f, RealField h,
                                 std::string name = "custom");

/// Node value of a 2D transverse function on the n x n grid.
Eigen::ArrayXd sample_transverse(const Grid& g,
                                 const std::function<double(double, double)>& fn);
Eigen::ArrayXd sample_longitudinal(const Grid& g,
                                   const std::function<double(double)>& fn);

}  // namespace pwinv
