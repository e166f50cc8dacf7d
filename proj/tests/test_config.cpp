#include <doctest.h>

#include "pwinv/config.hpp"
#include "pwinv/profiles.hpp"
#include "pwinv/quadrature.hpp"

#include <cmath>
#include <string>

using namespace pwinv;

namespace {

std::string separated_descriptor(double c_amp = 0.3, double q_center = 0.0) {
  return R"({"name":"sep","grid_n":32,"omega_half_width":1.9,
    "sponge":{"cells":5},
    "profile":{"axis":2,"longitudinal_kind":"mollified_indicator","a":-0.9,"b":0.9,"mollifier_radius":0.4},
    "bumps":[
      {"field":"q0","kind":"gaussian","center":[)" +
         std::to_string(q_center) + R"(,0],"radius":0.5,"amplitude":1.0,"cutoff":[0.9,1.2]},
      {"field":"c","kind":"plateau","center":[0,0,0],"radius":1.25,"taper":0.2,
       "longitudinal_radius":0.5,"amplitude":)" +
         std::to_string(c_amp) + "}]}";
}

}  // namespace

TEST_CASE("separated phantom has f/c^2 = q0(x') phi(x3)") {
  const auto cfg = build_phantom(separated_descriptor());
  REQUIRE(cfg.quotient.has_value());
  const auto& g = cfg.grid();
  const RealField q = cfg.f / (cfg.c * cfg.c);
  double err = 0;
  for (int k = 0; k < g.n; ++k)
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i) {
        const double x = g.x(i), y = g.x(j), z = g.x(k);
        const double q0 = profiles::gaussian(x * x + y * y, 0.5) *
                          profiles::radial_cutoff(std::hypot(x, y), 0.9, 1.2);
        const double phi = profiles::mollified_indicator(z, -0.9, 0.9, 0.4);
        err = std::max(err, std::abs(q[g.index(i, j, k)] - q0 * phi));
      }
  CHECK(err <= 1e-12);
  // The plateau keeps c constant across supp q0, so f itself separates too.
  CHECK(cfg.source.has_value());
  CHECK(cfg.c.maxCoeff() == doctest::Approx(1.3).epsilon(1e-9));
  CHECK(check_admissibility(cfg).ok());
}

TEST_CASE("support and bounds violations are reported") {
  try {
    build_phantom(separated_descriptor(0.3, 0.8));
    FAIL("expected support violation");
  } catch (const ConfigError& e) {
    CHECK(e.kind == "support-violation");
  }
  try {
    build_phantom(separated_descriptor(1.5));
    FAIL("expected bounds violation");
  } catch (const ConfigError& e) {
    CHECK(e.kind == "bounds-violation");
  }
}

TEST_CASE("omega too close to the layer is rejected") {
  CHECK_THROWS_AS(Domain::make(32, 2.6, {5, 0.0, 3}), ConfigError);
  CHECK_NOTHROW(Domain::make(32, 1.9, {5, 0.0, 3}));
}

TEST_CASE("descriptor errors name the field path") {
  const std::string bad = R"({"grid_n":32,"omega_half_width":1.9,
    "bumps":[{"field":"c","kind":"bump","center":[0,0],"radius":0.5,"amplitude":0.1}]})";
  try {
    build_phantom(bad);
    FAIL("expected descriptor error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bumps[0].center") != std::string::npos);
  }
}

TEST_CASE("omega faces sit half a cell outside the extreme nodes") {
  const auto d = Domain::make(64, 1.9, {10, 0.0, 3});
  const double h = d.grid.h;
  CHECK(d.face(0, 0) == doctest::Approx(d.grid.x(d.omega.lo[0]) - h / 2));
  CHECK(d.face(2, 1) == doctest::Approx(d.grid.x(d.omega.hi[2]) + h / 2));
  CHECK(d.face(1, 1) >= 1.9);
  const RealField gam = d.damping();
  CHECK(gam[d.grid.index(32, 32, 32)] == 0.0);
  CHECK(gam[d.grid.index(0, 32, 32)] == doctest::Approx(d.gamma_max()));
}

TEST_CASE("phi_weighted_integral: constant profile against the closed form") {
  const double a = -0.7, b = 1.1;
  for (double xi : {0.0, 1.0, 3.5, 9.0}) {
    const int n = 401;
    Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(n);
    const cplx w(0, xi);
    const cplx got = phi_weighted_integral(ones, a, b, w);
    const cplx want = xi == 0 ? cplx(b - a) : (std::exp(w * b) - std::exp(w * a)) / w;
    CHECK(std::abs(got - want) <= 1e-10 * std::abs(want));
  }
}

TEST_CASE("phi_weighted_integral: Gaussian with real weight against a fine Riemann sum") {
  const double a = -3, b = 3;
  auto prof = [](double s) { return std::exp(-s * s); };
  const int n = 257;
  Eigen::ArrayXd p(n);
  for (int i = 0; i < n; ++i) p[i] = prof(a + i * (b - a) / (n - 1));
  const cplx got = phi_weighted_integral(p, a, b, 2.5);
  // Midpoint sum at 10^6 points.
  const int m = 1000000;
  const double ds = (b - a) / m;
  double ref = 0;
  for (int i = 0; i < m; ++i) {
    const double s = a + (i + 0.5) * ds;
    ref += prof(s) * std::exp(2.5 * s) * ds;
  }
  CHECK(std::abs(got - ref) <= 1e-8 * std::abs(ref));
}

TEST_CASE("phi_weighted_integral rejects under-resolved oscillation") {
  Eigen::ArrayXd p = Eigen::ArrayXd::Ones(20);
  CHECK_THROWS_AS(phi_weighted_integral(p, 0, 1, cplx(0, 40)), ResolutionError);
}

TEST_CASE("gregory weights integrate low-degree polynomials exactly") {
  const int n = 23;
  const auto w = gregory_weights(n, 0.1);
  for (int deg = 0; deg <= 5; ++deg) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += w[std::size_t(i)] * std::pow(i * 0.1, deg);
    const double exact = std::pow(2.2, deg + 1) / (deg + 1);
    CHECK(s == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("gaussian longitudinal profile and plateau taper") {
  const auto cfg = build_phantom(R"({"name":"g","grid_n":32,"omega_half_width":1.9,
    "profile":{"axis":2,"longitudinal_kind":"gaussian","a":-1.2,"b":1.0,"width":0.3,"exp_weight":0.5},
    "bumps":[
      {"field":"q0","kind":"gaussian","center":[0,0],"radius":0.5,"amplitude":1.0,"cutoff":[1.0,1.2]},
      {"field":"c","kind":"plateau","center":[0,0,0],"radius":1.3,"taper":0.3,
       "longitudinal_radius":1.2,"longitudinal_width":0.3,"amplitude":0.2}]})");
  REQUIRE(cfg.quotient.has_value());
  const auto& g = cfg.grid();
  double err = 0;
  for (int k = 0; k < g.n; ++k) {
    const double s = g.x(k), d = std::abs(s + 0.1);
    const double phi = std::exp(0.5 * s) * profiles::gaussian(d * d, 0.3) *
                       profiles::radial_cutoff(d, 0.825, 1.1);
    err = std::max(err, std::abs(cfg.quotient->longitudinal[k] - phi));
  }
  CHECK(err <= 1e-14);
  // On the axis the speed follows the Gaussian longitudinal factor.
  const int i0 = g.n / 2;
  for (int k = 0; k < g.n; ++k) {
    const double z = std::abs(g.x(k));
    const double expect = 1.0 + 0.2 * profiles::gaussian(z * z, 0.3) *
                                    profiles::radial_cutoff(z, 0.9, 1.2);
    CHECK(cfg.c[g.index(i0, i0, k)] == doctest::Approx(expect).epsilon(1e-13));
  }
  CHECK_THROWS_AS(build_phantom(R"({"name":"g","grid_n":32,"omega_half_width":1.9,
    "profile":{"axis":2,"longitudinal_kind":"gaussian","a":-1.0,"b":1.0,"width":-0.3},
    "bumps":[{"field":"q0","kind":"gaussian","center":[0,0],"radius":0.5,"amplitude":1.0,"cutoff":[1.0,1.2]}]})"),
                  ConfigError);
}
