#include "pwinv/config.hpp"

#include "pwinv/profiles.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pwinv {

using nlohmann::json;

Domain Domain::make(int n, double half_width, SpongeSettings sponge) {
  Domain d;
  d.grid = Grid(n);
  d.half_width = half_width;
  d.sponge = sponge;
  const double h = d.grid.h, pi = std::numbers::pi;
  if (!(half_width > 0.0) || half_width >= pi)
    throw ConfigError("grid-admissibility", "omega half width out of range");
  const int lo = int(std::ceil((pi - half_width) / h - 1e-9));
  const int hi = int(std::floor((pi + half_width) / h + 1e-9));
  d.omega.lo = {lo, lo, lo};
  d.omega.hi = {hi, hi, hi};
  const int W = sponge.cells;
  if (W < 0) throw ConfigError("grid-admissibility", "negative layer width");
  if (lo - 2 < W || hi + 2 > n - W)
    throw ConfigError("grid-admissibility",
                      "omega must stay at least 2 cells from the absorbing layer");
  if (hi - lo < 4) throw ConfigError("grid-admissibility", "omega too small");
  return d;
}

double Domain::face(int axis, int side) const {
  return side == 0 ? grid.x(omega.lo[axis]) - 0.5 * grid.h
                   : grid.x(omega.hi[axis]) + 0.5 * grid.h;
}

double Domain::layer_depth(int i) const {
  const int W = sponge.cells, n = grid.n;
  if (W == 0) return 0.0;
  if (i < W) return double(W - i) / W;
  if (i > n - W) return double(i - (n - W)) / W;
  return 0.0;
}

double Domain::gamma_max() const {
  if (sponge.cells == 0) return 0.0;
  if (sponge.strength > 0.0) return sponge.strength;
  const double width = sponge.cells * grid.h;
  return 0.5 * (sponge.power + 1) * std::log(1e6) / width;
}

double Domain::layer_profile(double p) const {
  const int W = sponge.cells, n = grid.n;
  if (W == 0) return 0.0;
  double depth = 0.0;
  if (p < W) depth = (W - p) / W;
  else if (p > n - W) depth = (p - (n - W)) / W;
  return gamma_max() * std::pow(depth, sponge.power);
}

double Domain::gamma_axis(int i) const {
  return gamma_max() * std::pow(layer_depth(i), sponge.power);
}

RealField Domain::damping() const {
  const int n = grid.n;
  std::vector<double> g1(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g1[std::size_t(i)] = gamma_axis(i);
  RealField out(static_cast<Eigen::Index>(grid.size()));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        out[grid.index(i, j, k)] = g1[std::size_t(i)] + g1[std::size_t(j)] + g1[std::size_t(k)];
  return out;
}

RealField SeparatedProfile::lift(const Grid& g) const {
  RealField out(static_cast<Eigen::Index>(g.size()));
  const int n = g.n;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        out[g.index(i, j, k)] = transverse[j * n + i] * longitudinal[k];
  return out;
}

bool Configuration::sigma_is_unity() const {
  return (sigma - 1.0).abs().maxCoeff() == 0.0;
}
bool Configuration::h_is_zero() const { return h.abs().maxCoeff() == 0.0; }

Eigen::ArrayXd sample_transverse(const Grid& g,
                                 const std::function<double(double, double)>& fn) {
  Eigen::ArrayXd out(g.n * g.n);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) out[j * g.n + i] = fn(g.x(i), g.x(j));
  return out;
}

Eigen::ArrayXd sample_longitudinal(const Grid& g,
                                   const std::function<double(double)>& fn) {
  Eigen::ArrayXd out(g.n);
  for (int k = 0; k < g.n; ++k) out[k] = fn(g.x(k));
  return out;
}

AdmissibilityReport check_admissibility(const Configuration& cfg) {
  AdmissibilityReport r;
  const Grid& g = cfg.grid();
  r.c_min = cfg.c.minCoeff();
  r.c_max = cfg.c.maxCoeff();
  r.sigma_min = cfg.sigma.minCoeff();
  r.sigma_max = cfg.sigma.maxCoeff();
  if (r.c_min < cfg.bounds.c_min || r.c_max > cfg.bounds.c_max) {
    r.bounds_ok = false;
    r.violations.push_back("bounds-violation: c outside [" +
                           std::to_string(cfg.bounds.c_min) + ", " +
                           std::to_string(cfg.bounds.c_max) + "]");
  }
  if (r.sigma_min < cfg.bounds.sigma_min || r.sigma_max > cfg.bounds.sigma_max) {
    r.bounds_ok = false;
    r.violations.push_back("bounds-violation: sigma outside bounds");
  }
  // Coefficients must be homogeneous on the outermost node layer of Omega
  // and everywhere outside it.
  const IndexBox inner = cfg.domain.omega.grown(-1);
  bool bad_f = false, bad_h = false, bad_c = false, bad_s = false;
  for (int k = 0; k < g.n; ++k)
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i) {
        if (inner.contains(i, j, k)) continue;
        const auto id = g.index(i, j, k);
        bad_f |= cfg.f[id] != 0.0;
        bad_h |= cfg.h[id] != 0.0;
        bad_c |= cfg.c[id] != 1.0;
        bad_s |= cfg.sigma[id] != 1.0;
      }
  auto flag = [&](bool bad, const char* what) {
    if (!bad) return;
    r.support_ok = false;
    r.violations.push_back(std::string("support-violation: ") + what +
                           " not homogeneous outside the interior of omega");
  };
  flag(bad_f, "f");
  flag(bad_h, "h");
  flag(bad_c, "c");
  flag(bad_s, "sigma");
  const auto verify_sep = [&](const std::optional<SeparatedProfile>& p,
                              const RealField& target, const char* what) {
    if (!p) return;
    const RealField lifted = p->lift(g);
    const double scale = std::max(target.abs().maxCoeff(), 1e-300);
    if ((lifted - target).abs().maxCoeff() > 1e-12 * scale) {
      r.separated_ok = false;
      r.violations.push_back(std::string("separation: ") + what +
                             " does not match its separated profile");
    }
  };
  verify_sep(cfg.quotient, RealField(cfg.f / (cfg.c * cfg.c)), "f/c^2");
  verify_sep(cfg.source, cfg.f, "f");
  return r;
}

Configuration make_configuration(const Domain& dom, RealField c, RealField sigma,
                                 RealField f, RealField h, std::string name) {
  Configuration cfg;
  cfg.name = std::move(name);
  cfg.domain = dom;
  cfg.c = std::move(c);
  cfg.sigma = std::move(sigma);
  cfg.f = std::move(f);
  cfg.h = std::move(h);
  return cfg;
}

namespace {

using Fn3 = std::function<double(double, double, double)>;
using Fn2 = std::function<double(double, double)>;

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw ConfigError("descriptor", path + ": " + msg);
}

double num(const json& j, const std::string& key, const std::string& path,
           std::optional<double> dflt = std::nullopt) {
  if (!j.contains(key)) {
    if (dflt) return *dflt;
    bad(path + "." + key, "missing");
  }
  if (!j[key].is_number()) bad(path + "." + key, "must be a number");
  return j[key].get<double>();
}

std::vector<double> vec(const json& j, const std::string& key,
                        const std::string& path, std::size_t len) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != len)
    bad(path + "." + key, "must be an array of " + std::to_string(len) + " numbers");
  std::vector<double> v;
  for (const auto& x : j[key]) {
    if (!x.is_number()) bad(path + "." + key, "must contain numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

struct Bump {
  std::string field, kind;
  std::vector<double> center;
  double radius = 0, amplitude = 0;
  double cut0 = 0, cut1 = 0;       // gaussian cutoff
  double taper = 0, lradius = 0;   // plateau
  double lwidth = 0;               // plateau: gaussian longitudinal width (0: bump)
  // Support box half extents around center (per component).
  std::vector<double> extent;
};

Bump parse_bump(const json& j, const std::string& path) {
  Bump b;
  if (!j.contains("field") || !j["field"].is_string()) bad(path + ".field", "missing");
  if (!j.contains("kind") || !j["kind"].is_string()) bad(path + ".kind", "missing");
  b.field = j["field"];
  b.kind = j["kind"];
  static const std::vector<std::string> fields = {"c", "sigma", "f", "h", "q0", "p"};
  if (std::find(fields.begin(), fields.end(), b.field) == fields.end())
    bad(path + ".field", "unknown field '" + b.field + "'");
  const bool planar = b.field == "q0" || b.field == "p";
  const std::size_t dim = planar ? 2 : 3;
  b.center = vec(j, "center", path, dim);
  b.radius = num(j, "radius", path);
  b.amplitude = num(j, "amplitude", path);
  if (!(b.radius > 0)) bad(path + ".radius", "must be positive");
  if (b.kind == "gaussian") {
    const auto cut = vec(j, "cutoff", path, 2);
    b.cut0 = cut[0];
    b.cut1 = cut[1];
    if (!(b.cut1 > b.cut0 && b.cut0 >= 0)) bad(path + ".cutoff", "need 0 <= r0 < r1");
    b.extent.assign(dim, b.cut1);
  } else if (b.kind == "bump") {
    b.extent.assign(dim, b.radius);
  } else if (b.kind == "plateau") {
    if (planar) bad(path + ".kind", "plateau is a 3D kind");
    b.taper = num(j, "taper", path);
    b.lradius = num(j, "longitudinal_radius", path);
    if (!(b.taper > 0 && b.lradius > 0)) bad(path, "taper and longitudinal_radius must be positive");
    b.lwidth = num(j, "longitudinal_width", path, 0.0);
    if (b.lwidth < 0) bad(path + ".longitudinal_width", "must be non-negative");
    b.extent = {b.radius + b.taper, b.radius + b.taper, b.lradius};
  } else {
    bad(path + ".kind", "unknown kind '" + b.kind + "'");
  }
  return b;
}

Fn3 bump_fn3(const Bump& b) {
  const double cx = b.center[0], cy = b.center[1], cz = b.center[2];
  if (b.kind == "gaussian")
    return [=](double x, double y, double z) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
      return b.amplitude * profiles::gaussian(r2, b.radius) *
             profiles::radial_cutoff(std::sqrt(r2), b.cut0, b.cut1);
    };
  if (b.kind == "bump")
    return [=](double x, double y, double z) {
      const double r = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
      return b.amplitude * profiles::compact_bump(r, b.radius);
    };
  return [=](double x, double y, double z) {  // plateau
    const double rt = std::hypot(x - cx, y - cy), dz = std::abs(z - cz);
    const double lon =
        b.lwidth > 0
            ? profiles::gaussian(dz * dz, b.lwidth) * profiles::radial_cutoff(dz, 0.75 * b.lradius, b.lradius)
            : profiles::compact_bump(dz, b.lradius);
    return b.amplitude * profiles::radial_cutoff(rt, b.radius, b.radius + b.taper) * lon;
  };
}

Fn2 bump_fn2(const Bump& b) {
  const double cx = b.center[0], cy = b.center[1];
  if (b.kind == "gaussian")
    return [=](double x, double y) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      return b.amplitude * profiles::gaussian(r2, b.radius) *
             profiles::radial_cutoff(std::sqrt(r2), b.cut0, b.cut1);
    };
  return [=](double x, double y) {
    return b.amplitude * profiles::compact_bump(std::hypot(x - cx, y - cy), b.radius);
  };
}

Fn3 sum_fn(std::vector<Fn3> parts, double base) {
  return [parts = std::move(parts), base](double x, double y, double z) {
    double v = base;
    for (const auto& p : parts) v += p(x, y, z);
    return v;
  };
}

// If F(x) = T(x1, x2) L(x3) on the grid, returns the separated profile with
// L(s) = F(x*, s) / T(x*) at the transverse peak x* of |T|.
std::optional<SeparatedProfile> detect_separated(const Grid& g, const RealField& F,
                                                 const Fn3& Ffn, const Fn2& T) {
  SeparatedProfile p;
  p.transverse = sample_transverse(g, T);
  p.transverse_fn = T;
  Eigen::Index peak = 0;
  p.transverse.abs().maxCoeff(&peak);
  const double tp = p.transverse[peak];
  if (tp == 0.0) return std::nullopt;
  const double xs = g.x(int(peak % g.n)), ys = g.x(int(peak / g.n));
  p.longitudinal_fn = [Ffn, xs, ys, tp](double s) { return Ffn(xs, ys, s) / tp; };
  p.longitudinal = sample_longitudinal(g, p.longitudinal_fn);
  const double scale = std::max(F.abs().maxCoeff(), 1e-300);
  if ((p.lift(g) - F).abs().maxCoeff() > 1e-12 * scale) return std::nullopt;
  return p;
}

}  // namespace

Configuration build_phantom(const std::string& text) {
  json d;
  try {
    d = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("descriptor", std::string("invalid JSON: ") + e.what());
  }
  if (!d.is_object()) bad("$", "descriptor must be an object");
  if (!d.contains("grid_n") || !d["grid_n"].is_number_integer()) bad("grid_n", "missing integer");
  const int n = d["grid_n"];
  if (n < 16 || n > 512) bad("grid_n", "must lie in [16, 512]");
  const double L = num(d, "omega_half_width", "$");
  SpongeSettings sp;
  if (d.contains("sponge")) {
    const auto& s = d["sponge"];
    sp.cells = int(num(s, "cells", "sponge", 10.0));
    sp.strength = num(s, "strength", "sponge", 0.0);
    sp.power = int(num(s, "power", "sponge", 2.0));
    sp.alpha = num(s, "alpha", "sponge", 0.0);
  } else {
    sp.cells = std::max(4, n / 6);
  }
  Bounds bounds;
  if (d.contains("bounds")) {
    const auto& b = d["bounds"];
    if (b.contains("c")) {
      const auto v = vec(b, "c", "bounds", 2);
      bounds.c_min = v[0];
      bounds.c_max = v[1];
    }
    if (b.contains("sigma")) {
      const auto v = vec(b, "sigma", "bounds", 2);
      bounds.sigma_min = v[0];
      bounds.sigma_max = v[1];
    }
  }
  Domain dom = Domain::make(n, L, sp);
  const Grid& g = dom.grid;
  // Strict support: one full cell inside the faces of omega.
  const double inner = dom.face(0, 1) - g.h - 1e-12;

  std::vector<Bump> bumps;
  if (d.contains("bumps")) {
    if (!d["bumps"].is_array()) bad("bumps", "must be an array");
    for (std::size_t i = 0; i < d["bumps"].size(); ++i)
      bumps.push_back(parse_bump(d["bumps"][i], "bumps[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < bumps.size(); ++i)
    for (std::size_t a = 0; a < bumps[i].center.size(); ++a)
      if (std::abs(bumps[i].center[a]) + bumps[i].extent[a] > inner)
        throw ConfigError("support-violation", "bumps[" + std::to_string(i) +
                                                   "] reaches outside omega");

  std::vector<Fn3> cparts, sparts, fparts, hparts;
  std::vector<Fn2> qparts, pparts;
  for (const auto& b : bumps) {
    if (b.field == "q0") qparts.push_back(bump_fn2(b));
    else if (b.field == "p") pparts.push_back(bump_fn2(b));
    else if (b.field == "c") cparts.push_back(bump_fn3(b));
    else if (b.field == "sigma") sparts.push_back(bump_fn3(b));
    else if (b.field == "f") fparts.push_back(bump_fn3(b));
    else hparts.push_back(bump_fn3(b));
  }
  if (!qparts.empty() && !pparts.empty())
    bad("bumps", "q0 and p bumps are mutually exclusive");

  std::function<double(double)> phi;
  const bool planar = !qparts.empty() || !pparts.empty();
  if (planar) {
    if (!d.contains("profile")) bad("profile", "required with q0 or p bumps");
    const auto& pr = d["profile"];
    const int axis = int(num(pr, "axis", "profile", 2.0));
    if (axis != 2) bad("profile.axis", "only the x3 axis is supported");
    const std::string kind = pr.value("longitudinal_kind", "mollified_indicator");
    const double a = num(pr, "a", "profile"), b = num(pr, "b", "profile");
    if (!(b > a)) bad("profile.b", "must exceed profile.a");
    const double r = num(pr, "mollifier_radius", "profile", 0.0);
    const double lam = num(pr, "exp_weight", "profile", 0.0);
    double hi_extent;
    if (kind == "mollified_indicator") {
      phi = [=](double s) { return std::exp(lam * s) * profiles::mollified_indicator(s, a, b, r); };
      hi_extent = std::max(std::abs(a - r), std::abs(b + r));
    } else if (kind == "bump") {
      const double m = 0.5 * (a + b), R = 0.5 * (b - a);
      phi = [=](double s) { return std::exp(lam * s) * profiles::compact_bump(std::abs(s - m), R); };
      hi_extent = std::max(std::abs(a), std::abs(b));
    } else if (kind == "gaussian") {
      const double m = 0.5 * (a + b), R = 0.5 * (b - a);
      const double w = num(pr, "width", "profile");
      if (!(w > 0)) bad("profile.width", "must be positive");
      phi = [=](double s) {
        const double d = std::abs(s - m);
        return std::exp(lam * s) * profiles::gaussian(d * d, w) * profiles::radial_cutoff(d, 0.75 * R, R);
      };
      hi_extent = std::max(std::abs(a), std::abs(b));
    } else {
      bad("profile.longitudinal_kind", "unknown kind '" + kind + "'");
    }
    if (hi_extent > inner)
      throw ConfigError("support-violation", "longitudinal profile reaches outside omega");
  }

  const Fn3 cfn = sum_fn(cparts, 1.0);
  const Fn3 sfn = sum_fn(sparts, 1.0);
  const Fn3 hfn = sum_fn(hparts, 0.0);
  const Fn3 f3 = sum_fn(fparts, 0.0);
  Fn2 tfn;
  if (!qparts.empty() || !pparts.empty()) {
    auto parts = qparts.empty() ? pparts : qparts;
    tfn = [parts](double x, double y) {
      double v = 0;
      for (const auto& p : parts) v += p(x, y);
      return v;
    };
  }
  Fn3 ffn;
  if (!qparts.empty())
    ffn = [=](double x, double y, double z) {
      const double c = cfn(x, y, z);
      return f3(x, y, z) + c * c * tfn(x, y) * phi(z);
    };
  else if (!pparts.empty())
    ffn = [=](double x, double y, double z) { return f3(x, y, z) + tfn(x, y) * phi(z); };
  else
    ffn = f3;

  Configuration cfg;
  cfg.name = d.value("name", std::string("phantom"));
  cfg.domain = dom;
  cfg.bounds = bounds;
  cfg.c = g.sample(cfn);
  cfg.sigma = g.sample(sfn);
  cfg.f = g.sample(ffn);
  cfg.h = g.sample(hfn);
  cfg.descriptor = d.dump();

  if (planar && fparts.empty()) {
    const RealField q = cfg.f / (cfg.c * cfg.c);
    const Fn3 qfn = [=](double x, double y, double z) {
      const double c = cfn(x, y, z);
      return ffn(x, y, z) / (c * c);
    };
    cfg.quotient = detect_separated(g, q, qfn, tfn);
    cfg.source = detect_separated(g, cfg.f, ffn, tfn);
    if (!qparts.empty() && !cfg.quotient)
      throw ConfigError("descriptor", "f/c^2 failed to separate");
    if (!pparts.empty() && !cfg.source)
      throw ConfigError("descriptor", "f failed to separate");
  }

  const auto rep = check_admissibility(cfg);
  if (!rep.ok()) {
    const std::string& first = rep.violations.front();
    const bool b = !rep.bounds_ok;
    throw ConfigError(b ? "bounds-violation" : "support-violation", first);
  }
  return cfg;
}

}  // namespace pwinv
