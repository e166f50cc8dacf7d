#include "pwinv/cli.hpp"

#include "pwinv/identities.hpp"
#include "pwinv/inversion.hpp"
#include "pwinv/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace pwinv::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

std::string g6(double v) { return fmt("%.6g", v); }
std::string e3(double v) { return fmt("%.3e", v); }

json cj(cplx z) { return json::array({z.real(), z.imag()}); }
cplx jc(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

const char* rule_name(TimeRule r) { return r == TimeRule::trapezoid ? "trapezoid" : "filon"; }
const char* window_name(Window w) { return w == Window::hard_cut ? "hard_cut" : "exponential_taper"; }

// ---------------------------------------------------------------- parsing

// Field reader that rejects unknown keys and reports full paths.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> keys)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError(path_.empty() ? "$" : path_, "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) throw ValidationError(sub(it.key()), "unknown field");
    }
  }
  std::string sub(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const char* k) const { return j_.contains(k); }
  const json& at(const char* k) const { return j_.at(k); }

  double num(const char* k, double def) const {
    if (!has(k)) return def;
    return number(j_.at(k), sub(k));
  }
  int integer(const char* k, int def) const {
    if (!has(k)) return def;
    if (!j_.at(k).is_number_integer()) throw ValidationError(sub(k), "must be an integer");
    return j_.at(k).get<int>();
  }
  bool boolean(const char* k, bool def) const {
    if (!has(k)) return def;
    if (!j_.at(k).is_boolean()) throw ValidationError(sub(k), "must be true or false");
    return j_.at(k).get<bool>();
  }
  std::string str(const char* k, const std::string& def) const {
    if (!has(k)) return def;
    if (!j_.at(k).is_string()) throw ValidationError(sub(k), "must be a string");
    return j_.at(k).get<std::string>();
  }
  std::vector<double> nums(const char* k) const {
    std::vector<double> v;
    if (!has(k)) return v;
    const json& a = j_.at(k);
    if (!a.is_array()) throw ValidationError(sub(k), "must be an array of numbers");
    for (std::size_t i = 0; i < a.size(); ++i)
      v.push_back(number(a[i], sub(k) + "[" + std::to_string(i) + "]"));
    return v;
  }
  std::vector<std::array<double, 2>> pairs(const char* k,
                                           std::vector<std::array<double, 2>> def) const {
    if (!has(k)) return def;
    const json& a = j_.at(k);
    if (!a.is_array()) throw ValidationError(sub(k), "must be an array of pairs");
    std::vector<std::array<double, 2>> v;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = sub(k) + "[" + std::to_string(i) + "]";
      if (!a[i].is_array() || a[i].size() != 2) throw ValidationError(p, "must be a pair");
      v.push_back({number(a[i][0], p + "[0]"), number(a[i][1], p + "[1]")});
    }
    return v;
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ValidationError(path, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(path, "must be finite");
    return x;
  }

 private:
  json j_;  // owned: callers pass temporaries for absent sections
  std::string path_;
};

SolverBlock parse_solver(const json& j, const std::string& path, bool allow_grid) {
  const Obj o(j, path, {"grid_n", "cfl", "dt", "T", "rule", "absorbing", "record_dataset"});
  SolverBlock b;
  if (o.has("grid_n") && !allow_grid) throw ValidationError(o.sub("grid_n"), "only allowed in spectral.solver");
  b.grid_n = o.integer("grid_n", 0);
  if (o.has("grid_n") && (b.grid_n < 16 || b.grid_n > 512))
    throw ValidationError(o.sub("grid_n"), "must lie in [16, 512]");
  b.cfl = o.num("cfl", 0.9);
  if (!(b.cfl > 0 && b.cfl <= 1))
    throw ValidationError(o.sub("cfl"), "must lie in (0, 1], got " + g6(b.cfl));
  b.dt = o.num("dt", 0.0);
  if (b.dt < 0) throw ValidationError(o.sub("dt"), "must be >= 0");
  // Six diameters of the periodic box.
  b.T = o.num("T", 6 * 2 * std::numbers::pi * std::sqrt(3.0));
  if (!(b.T > 0)) throw ValidationError(o.sub("T"), "must be positive");
  const std::string r = o.str("rule", "trapezoid");
  if (r == "trapezoid") b.rule = TimeRule::trapezoid;
  else if (r == "filon") b.rule = TimeRule::filon;
  else throw ValidationError(o.sub("rule"), "must be \"trapezoid\" or \"filon\"");
  b.absorbing = o.boolean("absorbing", true);
  b.record_dataset = o.boolean("record_dataset", false);
  return b;
}

json solver_json(const SolverBlock& b, bool with_grid) {
  json j = {{"cfl", b.cfl}, {"dt", b.dt}, {"T", b.T}, {"rule", rule_name(b.rule)},
            {"absorbing", b.absorbing}, {"record_dataset", b.record_dataset}};
  if (with_grid) j["grid_n"] = b.grid_n;
  return j;
}

struct CheckSpec {
  const char* relation;
  const char* stage;
};

const std::map<std::string, CheckSpec>& check_specs() {
  static const std::map<std::string, CheckSpec> m = {
      {"time_identity", {"<=", "verify"}},   {"freq_identity", {"<=", "verify"}},
      {"remainder_slope", {"<=", "verify"}}, {"q0_rel_l2", {"<=", "reconstruct"}},
      {"oracle_gain", {">=", "reconstruct"}}, {"f_rel_l2", {"<=", "reconstruct"}},
      {"f_error_slope", {"<=", "reconstruct"}}, {"c_rel_l2", {"<=", "reconstruct"}}};
  return m;
}

json pairs_json(const std::vector<std::array<double, 2>>& v) {
  json a = json::array();
  for (const auto& p : v) a.push_back({p[0], p[1]});
  return a;
}

json canonical_json(const Scenario& s) {
  json checks = json::object();
  for (const auto& [k, v] : s.checks) checks[k] = v;
  json spectral = {{"k", s.ks}, {"window", window_name(s.window)}, {"plane_modes", pairs_json(s.plane_modes)}};
  if (s.spectral_solver) spectral["solver"] = solver_json(*s.spectral_solver, true);
  return {{"name", s.name},
          {"seed", s.seed},
          {"phantom", s.phantom},
          {"solver", solver_json(s.solver, false)},
          {"spectral", spectral},
          {"cgo", {{"tau", s.taus}, {"verify_phases", pairs_json(s.verify_phases)}}},
          {"inversion",
           {{"quotient_box", s.quotient_box},
            {"source_box", s.source_box},
            {"theta", s.theta},
            {"quotient_degeneracy", s.quotient_degeneracy},
            {"source_degeneracy", s.source_degeneracy},
            {"oracle", s.oracle}}},
          {"noise", {{"level", s.noise}}},
          {"checks", checks},
          {"stages", s.stages},
          {"output", s.output}};
}

bool is_half_integer(double v) { return std::abs(v - std::floor(v) - 0.5) < 1e-12; }
bool is_integer(double v) { return v == std::floor(v); }

}  // namespace

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> s = {"simulate", "transform", "verify", "reconstruct", "report"};
  return s;
}

bool Scenario::has_stage(const std::string& s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

Scenario parse_scenario(const json& doc, const fs::path& base) {
  const Obj top(doc, "", {"name", "seed", "phantom", "solver", "spectral", "cgo", "inversion", "noise",
                          "checks", "stages", "output"});
  Scenario s;
  s.name = top.str("name", "");
  if (s.name.empty()) throw ValidationError("name", "required");
  for (char ch : s.name)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.'))
      throw ValidationError("name", "may only contain letters, digits, '_', '-' and '.'");
  if (top.has("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0)
      throw ValidationError("seed", "must be a non-negative integer");
    s.seed = doc["seed"].get<std::uint64_t>();
  }

  if (!top.has("phantom")) throw ValidationError("phantom", "required");
  if (doc["phantom"].is_string()) {
    const fs::path p = base / doc["phantom"].get<std::string>();
    try {
      s.phantom = read_json(p);
    } catch (const IOError& e) {
      throw ValidationError("phantom", e.what());
    }
  } else if (doc["phantom"].is_object()) {
    s.phantom = doc["phantom"];
  } else {
    throw ValidationError("phantom", "must be a descriptor object or a file name");
  }

  s.solver = parse_solver(top.has("solver") ? doc["solver"] : json::object(), "solver", false);

  if (top.has("spectral")) {
    const Obj o(doc["spectral"], "spectral", {"k", "window", "solver", "plane_modes"});
    s.ks = o.nums("k");
    for (std::size_t i = 0; i < s.ks.size(); ++i) {
      if (!(s.ks[i] > 0)) throw ValidationError("spectral.k[" + std::to_string(i) + "]", "must be positive");
      if (i > 0 && !(s.ks[i] > s.ks[i - 1]))
        throw ValidationError("spectral.k[" + std::to_string(i) + "]", "must be strictly increasing");
    }
    const std::string w = o.str("window", "hard_cut");
    if (w == "hard_cut") s.window = Window::hard_cut;
    else if (w == "exponential_taper") s.window = Window::exponential_taper;
    else throw ValidationError("spectral.window", "must be \"hard_cut\" or \"exponential_taper\"");
    if (o.has("solver")) s.spectral_solver = parse_solver(doc["spectral"]["solver"], "spectral.solver", true);
    s.plane_modes = o.pairs("plane_modes", {{0, 0}, {1, -2}});
  } else {
    s.plane_modes = {{0, 0}, {1, -2}};
  }
  for (std::size_t i = 0; i < s.plane_modes.size(); ++i)
    if (!is_integer(s.plane_modes[i][0]) || !is_integer(s.plane_modes[i][1]))
      throw ValidationError("spectral.plane_modes[" + std::to_string(i) + "]", "entries must be integers");

  {
    const Obj o(top.has("cgo") ? doc["cgo"] : json::object(), "cgo", {"tau", "verify_phases"});
    s.taus = o.nums("tau");
    for (std::size_t i = 0; i < s.taus.size(); ++i) {
      if (!(s.taus[i] > 0)) throw ValidationError("cgo.tau[" + std::to_string(i) + "]", "must be positive");
      for (std::size_t j = 0; j < i; ++j)
        if (s.taus[j] == s.taus[i]) throw ValidationError("cgo.tau[" + std::to_string(i) + "]", "repeated value");
    }
    s.verify_phases = o.pairs("verify_phases", {{0, 0.5}, {1, -0.5}, {2, 1.5}});
    for (std::size_t i = 0; i < s.verify_phases.size(); ++i)
      if (!is_integer(s.verify_phases[i][0]) || !is_half_integer(s.verify_phases[i][1]))
        throw ValidationError("cgo.verify_phases[" + std::to_string(i) + "]",
                              "needs an integer rho1 and a half-integer rho2");
  }

  {
    const Obj o(top.has("inversion") ? doc["inversion"] : json::object(), "inversion",
                {"quotient_box", "source_box", "theta", "quotient_degeneracy", "source_degeneracy", "oracle"});
    s.quotient_box = o.integer("quotient_box", 6);
    s.source_box = o.integer("source_box", 6);
    if (s.quotient_box < 0) throw ValidationError("inversion.quotient_box", "must be >= 0");
    if (s.source_box < 0) throw ValidationError("inversion.source_box", "must be >= 0");
    s.theta = o.num("theta", 0.3);
    if (!(s.theta > 0 && s.theta <= 1)) throw ValidationError("inversion.theta", "must lie in (0, 1]");
    s.quotient_degeneracy = o.num("quotient_degeneracy", 1e-8);
    s.source_degeneracy = o.num("source_degeneracy", 1e-12);
    if (!(s.quotient_degeneracy > 0)) throw ValidationError("inversion.quotient_degeneracy", "must be positive");
    if (!(s.source_degeneracy > 0)) throw ValidationError("inversion.source_degeneracy", "must be positive");
    s.oracle = o.boolean("oracle", false);
  }

  {
    const Obj o(top.has("noise") ? doc["noise"] : json::object(), "noise", {"level"});
    s.noise = o.num("level", 0.0);
    if (s.noise < 0) throw ValidationError("noise.level", "must be >= 0");
  }

  if (top.has("stages")) {
    const json& a = doc["stages"];
    if (!a.is_array() || a.empty()) throw ValidationError("stages", "must be a non-empty array");
    int last = -1;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = "stages[" + std::to_string(i) + "]";
      if (!a[i].is_string()) throw ValidationError(p, "must be a string");
      const auto& order = stage_order();
      const auto it = std::find(order.begin(), order.end(), a[i].get<std::string>());
      if (it == order.end()) throw ValidationError(p, "unknown stage \"" + a[i].get<std::string>() + "\"");
      const int at = int(it - order.begin());
      if (at <= last) throw ValidationError(p, "stages must appear once, in pipeline order");
      last = at;
      s.stages.push_back(*it);
    }
  } else {
    s.stages = stage_order();
  }
  if (!s.has_stage("simulate")) throw ValidationError("stages", "the pipeline starts with simulate");
  for (const char* st : {"verify", "reconstruct"})
    if (s.has_stage(st) && !s.has_stage("transform"))
      throw ValidationError("stages", std::string(st) + " needs the transform stage");

  if (top.has("checks")) {
    const json& c = doc["checks"];
    if (!c.is_object()) throw ValidationError("checks", "must be an object");
    for (auto it = c.begin(); it != c.end(); ++it) {
      const std::string p = "checks." + it.key();
      const auto spec = check_specs().find(it.key());
      if (spec == check_specs().end()) throw ValidationError(p, "unknown check");
      if (!s.has_stage(spec->second.stage))
        throw ValidationError(p, std::string("needs the ") + spec->second.stage + " stage");
      s.checks.emplace_back(it.key(), Obj::number(it.value(), p));
    }
  }

  s.output = top.str("output", "runs/" + s.name);
  if (s.output.empty()) throw ValidationError("output", "must not be empty");

  if (s.noise > 0 && !(s.solver.record_dataset && (!s.spectral_solver || s.spectral_solver->record_dataset)))
    throw ValidationError("noise.level", "noise is added to recorded datasets; set record_dataset");
  for (const auto& [name, limit] : s.checks) {
    const std::string p = "checks." + name;
    if (name == "time_identity" && s.taus.empty()) throw ValidationError(p, "needs cgo.tau");
    if ((name == "freq_identity" || name == "remainder_slope") && s.noise > 0)
      throw ValidationError(p, "needs noise-free interior transforms");
    if ((name == "freq_identity" || name == "remainder_slope" || name == "f_rel_l2" ||
         name == "f_error_slope" || name == "c_rel_l2") && s.ks.empty())
      throw ValidationError(p, "needs spectral.k");
    if ((name == "remainder_slope" || name == "f_error_slope") && s.ks.size() < 4)
      throw ValidationError(p, "a decay fit needs at least 4 frequencies");
    if ((name == "q0_rel_l2" || name == "oracle_gain" || name == "c_rel_l2") && s.taus.size() < 2)
      throw ValidationError(p, "needs at least two values in cgo.tau");
    if (name == "oracle_gain" && !s.oracle) throw ValidationError(p, "needs inversion.oracle");
  }
  if (s.has_stage("reconstruct") && s.taus.size() == 1)
    throw ValidationError("cgo.tau", "extrapolation needs at least two values");

  s.canonical = canonical_json(s);
  s.hash = sha256_hex(s.canonical.dump());
  return s;
}

Scenario load_scenario(const fs::path& file) {
  json doc;
  try {
    doc = read_json(file);
  } catch (const IOError& e) {
    throw ValidationError("$", e.what());
  }
  return parse_scenario(doc, file.parent_path());
}

namespace {

double effective_dt(const SolverBlock& b, const Configuration& cfg, const std::string& path) {
  const double lim = stable_dt(cfg);
  if (b.dt > 0) {
    if (b.dt > lim)
      throw ValidationError(path + ".dt", g6(b.dt) + " exceeds the stable step " + g6(lim));
    return b.dt;
  }
  return b.cfl * lim;
}

json phantom_at(const json& phantom, int grid_n) {
  json p = phantom;
  if (grid_n > 0) p["grid_n"] = grid_n;
  return p;
}

Configuration build(const json& phantom, const std::string& path) {
  try {
    return build_phantom(phantom.dump());
  } catch (const ConfigError& e) {
    throw ValidationError(path, e.what());
  }
}

}  // namespace

std::pair<Configuration, Configuration> build_phantoms(const Scenario& s) {
  Configuration t = build(s.phantom, "phantom");
  if (!s.spectral_solver) return {t, t};
  Configuration f = build(phantom_at(s.phantom, s.spectral_solver->grid_n), "phantom");
  return {std::move(t), std::move(f)};
}

void validate_scenario(const Scenario& s, const Configuration& tc, const Configuration& fc) {
  const double dt_t = effective_dt(s.solver, tc, "solver");
  const SolverBlock& fb = s.spectral_solver ? *s.spectral_solver : s.solver;
  const std::string fpath = s.spectral_solver ? "spectral.solver" : "solver";
  const double dt_f = s.spectral_solver ? effective_dt(fb, fc, fpath) : dt_t;

  const double inv_c2_max = tc.inv_c2().maxCoeff();
  for (std::size_t i = 0; i < s.taus.size(); ++i) {
    const std::string p = "cgo.tau[" + std::to_string(i) + "]";
    const double tau = s.taus[i];
    if (tau * s.solver.T < 8.0)
      throw ValidationError(p, "tau T = " + g6(tau * s.solver.T) + " is below 8 (raise solver.T)");
    if (2 * tau * tau * inv_c2_max >= 1.0)
      throw ValidationError(p, "corrector smallness 2 tau^2 max(1/c^2) = " +
                                   g6(2 * tau * tau * inv_c2_max) + " is not below 1");
  }
  const double hf = fc.grid().h;
  for (std::size_t i = 0; i < s.ks.size(); ++i) {
    const std::string p = "spectral.k[" + std::to_string(i) + "]";
    if (dt_f * s.ks[i] > 0.5)
      throw ValidationError(p, "dt k = " + g6(dt_f * s.ks[i]) + " exceeds 0.5 (lower " + fpath + ".dt)");
    if (s.ks[i] * hf >= 2.0)
      throw ValidationError(p, "k h = " + g6(s.ks[i] * hf) + " lies above the grid dispersion band (k h < 2)");
  }
  if (s.has_stage("reconstruct")) {
    if (s.quotient_box >= tc.grid().n / 4)
      throw ValidationError("inversion.quotient_box", "must stay below n/4 = " + std::to_string(tc.grid().n / 4));
    if (s.source_box >= fc.grid().n / 4)
      throw ValidationError("inversion.source_box", "must stay below n/4 = " + std::to_string(fc.grid().n / 4));
  }
  for (const auto& [name, limit] : s.checks) {
    const std::string p = "checks." + name;
    if ((name == "q0_rel_l2" || name == "oracle_gain") && !tc.quotient)
      throw ValidationError(p, "the phantom has no separated f/c^2");
    if ((name == "f_rel_l2" || name == "f_error_slope") && !fc.source)
      throw ValidationError(p, "the phantom has no separated f");
    if (name == "c_rel_l2" && !(tc.quotient && fc.source && fc.quotient))
      throw ValidationError(p, "needs both separated factors");
  }
}

Check make_check(std::string name, double value, std::string relation, double limit, std::string detail) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.relation = std::move(relation);
  c.limit = limit;
  c.detail = std::move(detail);
  c.pass = std::isfinite(value) && (c.relation == ">=" ? value >= limit : value <= limit);
  return c;
}

json to_json(const Check& c) {
  return {{"name", c.name}, {"value", c.value},  {"relation", c.relation},
          {"limit", c.limit}, {"pass", c.pass}, {"detail", c.detail}};
}

Check check_from_json(const json& j) {
  Check c;
  c.name = j.at("name").get<std::string>();
  c.value = j.at("value").is_number() ? j["value"].get<double>() : std::nan("");
  c.relation = j.at("relation").get<std::string>();
  c.limit = j.at("limit").get<double>();
  c.pass = j.at("pass").get<bool>();
  c.detail = j.value("detail", "");
  return c;
}

std::string stamp_line(const std::string& hash) {
  return "# scenario_hash=" + hash + " code_version=" + code_version() + "\n";
}

json write_manifest(const fs::path& dir, const std::string& name, const std::string& hash,
                    const std::vector<std::string>& stages, const std::vector<std::string>& artifacts,
                    const std::vector<Check>& checks, const std::vector<std::string>& notes,
                    const std::string& failed_stage) {
  json arts = json::object();
  for (const std::string& a : artifacts) arts[a] = sha256_hex(read_text(dir / a));
  json cs = json::array();
  bool all = failed_stage.empty();
  for (const Check& c : checks) {
    cs.push_back(to_json(c));
    all = all && c.pass;
  }
  json m = artifact_stamp(hash);
  m["format"] = "pwinv-manifest-1";
  m["name"] = name;
  m["stages"] = stages;
  m["artifacts"] = arts;
  m["checks"] = cs;
  m["all_pass"] = all;
  m["notes"] = notes;
  if (!failed_stage.empty()) m["failed_stage"] = failed_stage;
  write_json(dir / "manifest.json", m);
  return m;
}

// ---------------------------------------------------------------- pipeline

namespace {

struct FitRow {
  std::string quantity;
  DecayFit fit;
};

struct Pipeline {
  Pipeline(const Scenario& sc, fs::path d, std::ostream* l) : s(sc), dir(std::move(d)), log(l) {}

  const Scenario& s;
  fs::path dir;
  std::ostream* log;

  Configuration tc, fc;  // time run and frequency run (same object when shared)
  bool split = false;
  SimulationResult sim_t, sim_f;
  TimeTransformSet tset;
  std::vector<FrequencyField> freqs;
  std::vector<std::string> artifacts;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  std::vector<FitRow> fits;
  std::optional<QuotientReconstruction> q0;
  std::optional<SourceReconstruction> f;

  json stamp() const { return artifact_stamp(s.hash); }
  double limit(const std::string& name, bool& present) const {
    for (const auto& [k, v] : s.checks)
      if (k == name) {
        present = true;
        return v;
      }
    present = false;
    return 0;
  }
  void add_check(const std::string& name, double value, const std::string& detail) {
    bool present = false;
    const double lim = limit(name, present);
    if (present) checks.push_back(make_check(name, value, check_specs().at(name).relation, lim, detail));
  }
  void artifact(const std::string& name) {
    if (std::find(artifacts.begin(), artifacts.end(), name) == artifacts.end()) artifacts.push_back(name);
  }
  void put_json(const std::string& name, json j) {
    json out = stamp();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
    write_json(dir / name, out);
    artifact(name);
  }
  void put_csv(const std::string& name, const std::string& body) {
    write_text(dir / name, stamp_line(s.hash) + body);
    artifact(name);
  }
  void put_field(const std::string& name, const Eigen::ArrayXd& v, const Grid& g, int dims,
                 const std::string& what) {
    json h = stamp();
    h["name"] = what;
    h["grid_n"] = g.n;
    h["dims"] = dims;
    write_field(dir / name, v, h);
    artifact(name);
  }
  void say(const std::string& line) const {
    if (log) *log << line << "\n" << std::flush;
  }

  SolverSettings settings(const SolverBlock& b, const Configuration& cfg) const {
    SolverSettings st;
    st.cfl = b.cfl;
    st.dt = effective_dt(b, cfg, "solver");
    st.T = b.T;
    st.rule = b.rule;
    st.absorbing = b.absorbing;
    st.record_dataset = b.record_dataset;
    return st;
  }

  void simulate_stage();
  void transform_stage();
  void verify_stage();
  void reconstruct_stage();
  void write_fits();
};

bool wants_interior(const Scenario& s) { return s.has_stage("verify") && s.noise == 0 && !s.ks.empty(); }

json sim_json(const SimulationResult& r, const Configuration& cfg) {
  return {{"grid_n", cfg.grid().n},
          {"dt", r.dt},
          {"steps", r.steps},
          {"T", r.steps * r.dt},
          {"stable_dt", stable_dt(cfg)},
          {"eta_final", r.decay.eta_final},
          {"decay_integral", r.decay.integral},
          {"eventually_decreasing", r.decay.eventually_decreasing},
          {"slow_decay", r.decay.slow_decay}};
}

std::string decay_csv(const DecayEstimate& d) {
  std::string out = "t,eta\n";
  char b[96];
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    std::snprintf(b, sizeof b, "%.17g,%.17g\n", d.t[i], d.eta[i]);
    out += b;
  }
  return out;
}

void Pipeline::simulate_stage() {
  const auto add_k = [&](SolverSettings& st, bool interior) {
    for (double k : s.ks) {
      st.boundary_s.push_back(laplace_variable(k, s.window, st.T));
      if (interior) st.interior_s.push_back(laplace_variable(k, s.window, st.T));
    }
  };
  SolverSettings st = settings(s.solver, tc);
  if (s.noise > 0) st.record_dataset = true;
  if (!split) add_k(st, wants_interior(s));
  if (s.has_stage("transform"))
    for (double t : s.taus) st.boundary_s.push_back(cplx(t, 0));
  say("simulate: n = " + std::to_string(tc.grid().n) + ", dt = " + g6(st.dt) + ", T = " + g6(st.T));
  sim_t = simulate(tc, st);
  sim_t.dataset.scenario_hash = s.hash;
  sim_t.dataset.code_version = code_version();
  json info = {{"time", sim_json(sim_t, tc)}};
  if (st.record_dataset) {
    write_dataset(sim_t.dataset, dir / "dataset.bin");
    artifact("dataset.bin");
  }
  put_csv("decay.csv", decay_csv(sim_t.decay));

  if (split) {
    SolverSettings sf = settings(*s.spectral_solver, fc);
    if (s.noise > 0) sf.record_dataset = true;
    add_k(sf, wants_interior(s));
    say("simulate (frequency run): n = " + std::to_string(fc.grid().n) + ", dt = " + g6(sf.dt) +
        ", T = " + g6(sf.T));
    sim_f = simulate(fc, sf);
    sim_f.dataset.scenario_hash = s.hash;
    sim_f.dataset.code_version = code_version();
    info["frequency"] = sim_json(sim_f, fc);
    if (sf.record_dataset) {
      write_dataset(sim_f.dataset, dir / "dataset_freq.bin");
      artifact("dataset_freq.bin");
    }
    put_csv("decay_freq.csv", decay_csv(sim_f.decay));
  }
  put_json("simulation.json", info);
}

void add_noise(BoundaryDataset& d, double level, std::mt19937_64& rng) {
  double umax = 0, fmax = 0;
  for (std::size_t i = 0; i < d.data.size(); i += 2) {
    umax = std::max(umax, std::abs(d.data[i]));
    fmax = std::max(fmax, std::abs(d.data[i + 1]));
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t i = 0; i < d.data.size(); i += 2) {
    d.data[i] += level * umax * nd(rng);
    d.data[i + 1] += level * fmax * nd(rng);
  }
}

void Pipeline::transform_stage() {
  const SimulationResult& fr = split ? sim_f : sim_t;
  const SolverBlock& fb = split ? *s.spectral_solver : s.solver;
  if (s.noise > 0) {
    std::mt19937_64 rng(s.seed);
    BoundaryDataset dt = sim_t.dataset;
    add_noise(dt, s.noise, rng);
    BoundaryDataset df = dt;
    if (split) {
      df = sim_f.dataset;
      add_noise(df, s.noise, rng);
    }
    if (!s.taus.empty()) tset = TimeTransformSet::from_dataset(dt, s.taus);
    for (double k : s.ks) freqs.push_back(temporal_fourier(df, k, s.window, fb.rule, &fr.decay));
    notes.push_back("relative noise " + g6(s.noise) + " added to the traces with seed " + std::to_string(s.seed));
  } else {
    if (!s.taus.empty()) tset = TimeTransformSet::from_simulation(sim_t);
    for (std::size_t i = 0; i < s.ks.size(); ++i) freqs.push_back(frequency_field(fr, i));
  }
  json fj = json::array();
  for (const FrequencyField& F : freqs)
    fj.push_back({{"k", F.k},
                  {"s", cj(F.s)},
                  {"s2", cj(F.s2)},
                  {"s_src", cj(F.s_src)},
                  {"tail_bound", F.tail_bound},
                  {"tail_warning", F.tail_warning},
                  {"interior_values", F.has_values()}});
  for (const FrequencyField& F : freqs)
    if (F.tail_warning) notes.push_back("frequency k = " + g6(F.k) + " carries a tail warning");
  put_json("transforms.json",
           {{"time", {{"taus", s.taus}, {"T", sim_t.steps * sim_t.dt}, {"dt", sim_t.dt}}},
            {"frequency",
             {{"rule", rule_name(fb.rule)}, {"window", window_name(s.window)}, {"T", fr.steps * fr.dt},
              {"dt", fr.dt}, {"entries", fj}}}});
}

void Pipeline::verify_stage() {
  json entries = json::array();
  double worst_time = 0, worst_freq = 0;
  std::size_t n_time = 0, n_freq = 0;
  for (double tau : s.taus)
    for (const auto& ph : s.verify_phases) {
      CorrectorOptions co;
      co.dt = tset.dt;
      const CgoCorrector corr = solve_corrector(tc, CgoPhase::make_grid(ph[0], ph[1], cplx(0, tau), tc.grid()), co);
      const TestWave w = make_cgo_wave(corr);
      const PairingResult b = tset.pair(w);
      const PairingResult in = interior_source_pairing(tc, w);
      const double rel = std::abs(b.value - in.value) / std::abs(in.value);
      json comps = json::object();
      for (const auto& [name, v] : in.components) comps[name] = cj(v);
      entries.push_back({{"identity_id", "time_green"},
                         {"params", {{"tau", tau}, {"rho1", ph[0]}, {"rho2", ph[1]}}},
                         {"value", cj(b.value)},
                         {"reference", cj(in.value)},
                         {"components", comps},
                         {"tail_bound", b.tail_bound},
                         {"quadrature_error", b.quadrature_error},
                         {"corrector_iterations", corr.iterations},
                         {"relative_residual", rel}});
      worst_time = std::max(worst_time, rel);
      ++n_time;
    }

  std::vector<std::pair<double, double>> rem;
  for (const FrequencyField& F : freqs) {
    if (!F.has_values()) continue;
    for (const auto& m : s.plane_modes) {
      double x3 = 0;
      try {
        x3 = grid_plane_xi3(m[0], m[1], F.omega2().real(), fc.grid().h);
      } catch (const std::domain_error&) {
        notes.push_back("plane mode (" + g6(m[0]) + ", " + g6(m[1]) + ") has no grid wave at k = " + g6(F.k));
        continue;
      }
      const FreqIdentityResult r = freq_identity_residual(fc, F, make_plane_wave({m[0], m[1], x3}));
      entries.push_back({{"identity_id", "freq_green"},
                         {"params", {{"k", F.k}, {"m1", m[0]}, {"m2", m[1]}, {"xi3", x3}}},
                         {"value", cj(r.pairing.value)},
                         {"reference", cj(r.decomposition())},
                         {"components", {{"source", cj(r.source)}, {"remainder", cj(r.remainder)},
                                         {"gradient", cj(r.gradient)}}},
                         {"tail_bound", F.tail_bound},
                         {"quadrature_error", r.pairing.quadrature_error},
                         {"relative_residual", r.relative}});
      worst_freq = std::max(worst_freq, r.relative);
      ++n_freq;
    }
    rem.emplace_back(F.k, remainder(F, fc).l2);
  }
  put_json("identity_residuals.json", {{"residuals", entries}});
  if (n_time) add_check("time_identity", worst_time, "max over " + std::to_string(n_time) + " corrected waves");
  if (n_freq) add_check("freq_identity", worst_freq, "max over " + std::to_string(n_freq) + " plane waves");
  if (rem.size() >= 4) {
    bool wanted = false;
    limit("remainder_slope", wanted);
    try {
      fits.push_back({"remainder_l2", fit_decay_exponent(rem)});
      add_check("remainder_slope", fits.back().fit.slope, "log-log slope of the remainder norm");
    } catch (const SpectralError& e) {
      if (wanted) throw StageError("verify", e.what());
      notes.push_back(std::string("no remainder fit: ") + e.what());
    }
  }
  say("verify: " + std::to_string(n_time) + " time and " + std::to_string(n_freq) + " frequency residuals");
}

// Each mode carries its Hermitian part (T(m) + conj T(-m))/2, the part a real
// field keeps; errors are ranked on it.
json mode_list(const ModeTable& t) {
  json a = json::array();
  for (const ModeEntry& e : t.entries) {
    cplx herm = e.transverse;
    for (const ModeEntry& o : t.entries)
      if (o.m1 == -e.m1 && o.m2 == -e.m2) herm = 0.5 * (e.transverse + std::conj(o.transverse));
    json m = {{"m1", e.m1}, {"m2", e.m2}, {"value", cj(e.transverse)}, {"hermitian", cj(herm)},
              {"warning", e.warning}};
    if (e.has_truth && std::isfinite(e.truth_limit.real())) m["truth"] = cj(e.truth_limit);
    if (e.oracle) {
      json blind = json::array(), orc = json::array();
      for (std::size_t i = 0; i < e.params.size(); ++i) {
        blind.push_back(std::abs(e.raw[i] - e.truth_raw[i]));
        orc.push_back(std::abs(e.oracle_raw[i] - e.oracle_truth[i]));
      }
      m["blind_raw_error"] = blind;
      m["oracle_raw_error"] = orc;
    }
    a.push_back(m);
  }
  return a;
}

double min_oracle_gain(const json& modes) {
  double g = std::numeric_limits<double>::infinity();
  for (const json& m : modes)
    if (m.contains("oracle_raw_error"))
      for (std::size_t i = 0; i < m["oracle_raw_error"].size(); ++i)
        g = std::min(g, m["blind_raw_error"][i].get<double>() / m["oracle_raw_error"][i].get<double>());
  return g;
}

void Pipeline::reconstruct_stage() {
  json out = json::object();
  if (tc.quotient && s.taus.size() >= 2) {
    QuotientOptions opt;
    opt.taus = s.taus;
    opt.mode_box = s.quotient_box;
    opt.degeneracy = s.quotient_degeneracy;
    opt.oracle = s.oracle;
    q0 = recover_q0(tset, tc.quotient->longitudinal, opt, &tc);
    put_csv("modes_q0.csv", q0->table.csv());
    put_field("q0.bin", q0->q0, tc.grid(), 2, "q0");
    put_field("q0_true.bin", tc.quotient->transverse, tc.grid(), 2, "q0_true");
    json modes = mode_list(q0->table);
    json q = {{"rel_l2", q0->rel_l2}, {"max_err", q0->max_err}, {"taus", s.taus},
              {"mode_box", s.quotient_box}, {"lattice", q0->table.lattice},
              {"divisor", q0->table.divisor}, {"degeneracy", s.quotient_degeneracy},
              {"oracle", s.oracle}, {"modes", modes}};
    std::size_t warned = 0;
    for (const ModeEntry& e : q0->table.entries) warned += e.warning;
    q["extrapolation_warnings"] = warned;
    add_check("q0_rel_l2", q0->rel_l2, "relative L2 error of q0");
    if (s.oracle) {
      const double gain = min_oracle_gain(modes);
      q["oracle_gain_min"] = gain;
      add_check("oracle_gain", gain, "smallest blind/oracle raw-error ratio over modes and tau");
    }
    out["q0"] = q;
    say("reconstruct: q0 relative L2 error " + e3(q0->rel_l2));
  } else if (tc.quotient == std::nullopt) {
    notes.push_back("phantom has no separated f/c^2; q0 skipped");
  }

  if (fc.source && !freqs.empty()) {
    SourceOptions opt;
    opt.mode_box = s.source_box;
    opt.degeneracy = s.source_degeneracy;
    f = recover_f(freqs, make_boundary_layout(fc.domain, fc.sigma), fc.grid(), fc.source->longitudinal, opt, &fc);
    put_csv("modes_f.csv", f->table.csv());
    put_field("f.bin", f->f, fc.grid(), 3, "f");
    put_field("f_true.bin", fc.f, fc.grid(), 3, "f_true");
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [mode, fit] : f->error_fits) {
      fits.push_back({"f_error(" + std::to_string(mode.first) + "," + std::to_string(mode.second) + ")", fit});
      worst = std::max(worst, fit.slope);
    }
    out["f"] = {{"rel_l2", f->rel_l2}, {"max_err", f->max_err}, {"ks", s.ks},
                {"mode_box", s.source_box}, {"lattice", f->table.lattice},
                {"divisor", f->table.divisor}, {"degeneracy", s.source_degeneracy},
                {"modes", mode_list(f->table)}, {"error_fits", f->error_fits.size()}};
    add_check("f_rel_l2", f->rel_l2, "relative L2 error of f");
    bool present = false;
    limit("f_error_slope", present);
    if (present) {
      if (f->error_fits.empty()) throw StageError("reconstruct", "no mode has 4 usable frequencies for an error fit");
      out["f"]["worst_error_slope"] = worst;
      add_check("f_error_slope", worst, "largest per-mode slope of |raw - truth| against k");
    }
    say("reconstruct: f relative L2 error " + e3(f->rel_l2));
  } else if (!fc.source) {
    notes.push_back("phantom has no separated f; f skipped");
  }

  if (q0 && f && fc.quotient) {
    const Grid& g = fc.grid();
    const Eigen::ArrayXd q0f = split ? synthesize_transverse(q0->table, g) : q0->q0;
    const RealField q3 = lift_separated(g, q0f, fc.quotient->longitudinal);
    const SpeedReconstruction c = recover_c(f->f, q3, s.theta, fc.bounds, &fc);
    Eigen::ArrayXd mask(c.c.size());
    double e = 0, contrast = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask[i] = c.mask[std::size_t(i)] ? 1.0 : 0.0;
      if (c.mask[std::size_t(i)]) {
        e += (c.c[i] - fc.c[i]) * (c.c[i] - fc.c[i]);
        contrast += (fc.c[i] - 1) * (fc.c[i] - 1);
      }
    }
    put_field("c.bin", c.c, g, 3, "c");
    put_field("c_true.bin", fc.c, g, 3, "c_true");
    put_field("mask.bin", mask, g, 3, "mask");
    out["c"] = {{"rel_l2", c.rel_l2}, {"max_err", c.max_err}, {"theta", s.theta},
                {"mask_cells", c.mask_cells}, {"clamped", c.clamped},
                {"contrast_rel", contrast > 0 ? std::sqrt(e / contrast) : 0.0}};
    add_check("c_rel_l2", c.rel_l2, "relative L2 error of c on the mask");
    say("reconstruct: c relative L2 error " + e3(c.rel_l2) + " on " + std::to_string(c.mask_cells) + " cells");
  }
  put_json("reconstruction.json", out);
}

void Pipeline::write_fits() {
  if (fits.empty()) return;
  std::string csv = "quantity,slope,intercept,halfwidth,samples,k_min,k_max\n";
  json arr = json::array();
  char b[256];
  for (const FitRow& r : fits) {
    std::snprintf(b, sizeof b, "%s,%.17g,%.17g,%.17g,%zu,%.17g,%.17g\n", r.quantity.c_str(), r.fit.slope,
                  r.fit.intercept, r.fit.halfwidth, r.fit.samples.size(), r.fit.samples.front().first,
                  r.fit.samples.back().first);
    csv += b;
    json smp = json::array();
    for (const auto& [k, v] : r.fit.samples) smp.push_back({k, v});
    arr.push_back({{"quantity", r.quantity}, {"slope", r.fit.slope}, {"intercept", r.fit.intercept},
                   {"halfwidth", r.fit.halfwidth}, {"samples", smp}});
  }
  put_csv("decay_fits.csv", csv);
  put_json("decay_fits.json", {{"fits", arr}});
}

}  // namespace

RunSummary run_scenario(const Scenario& s, const std::optional<fs::path>& out, std::ostream* log) {
  Pipeline p(s, out ? *out : fs::path(s.output), log);
  // Phantoms and every cross-module constraint before any stage runs.
  std::tie(p.tc, p.fc) = build_phantoms(s);
  p.split = s.spectral_solver.has_value();
  validate_scenario(s, p.tc, p.fc);

  fs::create_directories(p.dir);
  write_text(p.dir / "scenario.json", s.canonical.dump(2) + "\n");
  p.artifact("scenario.json");

  std::string stage;
  try {
    for (const std::string& st : s.stages) {
      stage = st;
      const auto t0 = std::chrono::steady_clock::now();
      if (st == "simulate") p.simulate_stage();
      else if (st == "transform") p.transform_stage();
      else if (st == "verify") p.verify_stage();
      else if (st == "reconstruct") p.reconstruct_stage();
      else continue;  // report runs after the manifest
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      p.say("  " + st + " done in " + fmt("%.1f", sec) + " s");
    }
    stage = "finalize";
    p.write_fits();
  } catch (const StageError& e) {
    write_manifest(p.dir, s.name, s.hash, s.stages, p.artifacts, p.checks, p.notes, e.stage);
    throw;
  } catch (const std::exception& e) {
    write_manifest(p.dir, s.name, s.hash, s.stages, p.artifacts, p.checks, p.notes, stage);
    throw StageError(stage, e.what());
  }
  RunSummary r;
  r.dir = p.dir;
  r.manifest = write_manifest(p.dir, s.name, s.hash, s.stages, p.artifacts, p.checks, p.notes);
  r.all_pass = r.manifest["all_pass"].get<bool>();
  if (s.has_stage("report")) {
    const std::string text = report_artifacts(p.dir);
    if (log) *log << text;
  }
  return r;
}

// ---------------------------------------------------------------- report

namespace {

json load_manifest(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json"))
    throw IOError("missing-artifact", (dir / "manifest.json").string() + " (no artifact set)");
  return read_json(dir / "manifest.json");
}

std::string params_text(const json& p) {
  std::string t;
  for (auto it = p.begin(); it != p.end(); ++it) t += (t.empty() ? "" : " ") + it.key() + "=" + g6(it.value().get<double>());
  return t;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

std::string report_artifacts(const fs::path& dir) {
  const json m = load_manifest(dir);
  for (auto it = m.at("artifacts").begin(); it != m.at("artifacts").end(); ++it)
    if (!fs::exists(dir / it.key())) throw IOError("missing-artifact", (dir / it.key()).string());
  const std::string hash = m.at("scenario_hash").get<std::string>();
  const auto has = [&](const char* a) { return m["artifacts"].contains(a); };

  std::ostringstream os;
  std::size_t passed = 0;
  for (const json& c : m["checks"]) passed += c["pass"].get<bool>();
  os << "scenario  " << m.value("name", "") << "\n"
     << "hash      " << hash << "\n"
     << "code      " << m.at("code_version").get<std::string>() << "\n"
     << "stages   ";
  for (const json& st : m["stages"]) os << " " << st.get<std::string>();
  os << "\n";
  if (m.contains("failed_stage")) os << "FAILED in stage " << m["failed_stage"].get<std::string>() << "\n";
  os << "verdict   " << (m["all_pass"].get<bool>() ? "PASS" : "FAIL") << " (" << passed << "/"
     << m["checks"].size() << " checks)\n\nchecks\n";

  std::string checks_csv = "name,value,relation,limit,pass,detail\n";
  for (const json& cj_ : m["checks"]) {
    const Check c = check_from_json(cj_);
    os << "  " << (c.pass ? "PASS" : "FAIL") << "  " << pad(c.name, 34) << pad(e3(c.value), 11) << c.relation
       << " " << pad(e3(c.limit), 11) << c.detail << "\n";
    std::string d = c.detail;
    std::replace(d.begin(), d.end(), ',', ';');
    checks_csv += c.name + "," + fmt("%.17g", c.value) + "," + c.relation + "," + fmt("%.17g", c.limit) + "," +
                  (c.pass ? "1" : "0") + "," + d + "\n";
  }
  write_text(dir / "report_checks.csv", stamp_line(hash) + checks_csv);

  if (has("identity_residuals.json")) {
    const json r = read_json(dir / "identity_residuals.json");
    std::string csv = "identity_id,params,relative_residual,tail_bound,quadrature_error\n";
    os << "\nidentity residuals\n";
    for (const json& e : r["residuals"]) {
      const std::string p = params_text(e["params"]);
      os << "  " << pad(e["identity_id"].get<std::string>(), 12) << pad(p, 44)
         << "rel " << e3(e["relative_residual"].get<double>()) << "  tail " << e3(e["tail_bound"].get<double>())
         << "\n";
      csv += e["identity_id"].get<std::string>() + "," + p + "," +
             fmt("%.17g", e["relative_residual"].get<double>()) + "," + fmt("%.17g", e["tail_bound"].get<double>()) +
             "," + fmt("%.17g", e["quadrature_error"].get<double>()) + "\n";
    }
    write_text(dir / "report_identities.csv", stamp_line(hash) + csv);
  }

  if (has("decay_fits.json")) {
    const json r = read_json(dir / "decay_fits.json");
    std::string csv = "quantity,slope,halfwidth,samples\n";
    os << "\ndecay fits\n";
    std::vector<std::pair<double, std::string>> modes;
    for (const json& e : r["fits"]) {
      char b[160];
      std::snprintf(b, sizeof b, "  %-20sslope %-8.3f+- %.3f  (%zu k)\n", e["quantity"].get<std::string>().c_str(),
                    e["slope"].get<double>(), e["halfwidth"].get<double>(), e["samples"].size());
      if (e["quantity"].get<std::string>().rfind("f_error", 0) == 0) modes.emplace_back(e["slope"].get<double>(), b);
      else os << b;
      csv += e["quantity"].get<std::string>() + "," + fmt("%.17g", e["slope"].get<double>()) + "," +
             fmt("%.17g", e["halfwidth"].get<double>()) + "," + std::to_string(e["samples"].size()) + "\n";
    }
    if (!modes.empty()) {
      std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      os << "  per-mode f errors: " << modes.size() << " fits, least negative slopes:\n";
      for (std::size_t i = 0; i < std::min<std::size_t>(5, modes.size()); ++i) os << "  " << modes[i].second;
    }
    write_text(dir / "report_decay_fits.csv", stamp_line(hash) + csv);
  }

  if (has("reconstruction.json")) {
    const json r = read_json(dir / "reconstruction.json");
    std::string rcsv = "field,rel_l2,max_err\n";
    std::string mcsv = "table,m1,m2,hermitian_re,hermitian_im,truth_re,truth_im,abs_err\n";
    os << "\nreconstruction errors\n";
    for (const char* fld : {"q0", "f", "c"}) {
      if (!r.contains(fld)) continue;
      const json& e = r[fld];
      os << "  " << pad(fld, 4) << "rel L2 " << e3(e["rel_l2"].get<double>()) << "  max " << e3(e["max_err"].get<double>());
      if (e.contains("mask_cells"))
        os << "  mask " << e["mask_cells"].get<std::size_t>() << " cells, " << e["clamped"].get<std::size_t>()
           << " clamped, error/contrast " << e3(e["contrast_rel"].get<double>());
      os << "\n";
      rcsv += std::string(fld) + "," + fmt("%.17g", e["rel_l2"].get<double>()) + "," +
              fmt("%.17g", e["max_err"].get<double>()) + "\n";
      if (!e.contains("modes")) continue;
      struct Row {
        double err;
        std::string line;
      };
      std::vector<Row> rows;
      double tmax = 0;
      for (const json& md : e["modes"])
        if (md.contains("truth")) tmax = std::max(tmax, std::abs(jc(md["truth"])));
      for (const json& md : e["modes"]) {
        if (!md.contains("truth")) continue;
        const cplx v = jc(md["hermitian"]), t = jc(md["truth"]);
        const double err = std::abs(v - t);
        char b[320];
        std::snprintf(b, sizeof b, "%s,%g,%g,%.17g,%.17g,%.17g,%.17g,%.17g\n", fld, md["m1"].get<double>(),
                      md["m2"].get<double>(), v.real(), v.imag(), t.real(), t.imag(), err);
        mcsv += b;
        std::snprintf(b, sizeof b, "    (%5g, %5g)  |err| %.3e  rel to max mode %.3e\n", md["m1"].get<double>(),
                      md["m2"].get<double>(), err, tmax > 0 ? err / tmax : err);
        rows.push_back({err, b});
      }
      std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.err > b.err; });
      if (!rows.empty()) os << "    worst modes of " << fld << ":\n";
      for (std::size_t i = 0; i < std::min<std::size_t>(5, rows.size()); ++i) os << rows[i].line;
    }
    write_text(dir / "report_reconstruction.csv", stamp_line(hash) + rcsv);
    write_text(dir / "report_modes.csv", stamp_line(hash) + mcsv);
  }
  if (!m["notes"].empty()) {
    os << "\nnotes\n";
    for (const json& n : m["notes"]) os << "  " << n.get<std::string>() << "\n";
  }
  const std::string text = os.str();
  write_text(dir / "report.txt", text);
  return text;
}

// ---------------------------------------------------------------- verify

namespace {

double rel_err(const Eigen::ArrayXd& a, const Eigen::ArrayXd& t) {
  const double n = std::sqrt(t.square().sum());
  const double e = std::sqrt((a - t).square().sum());
  return n > 0 ? e / n : e;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

VerifyResult verify_artifacts(const fs::path& dir) {
  VerifyResult v;
  const json m = load_manifest(dir);
  auto problem = [&](std::string p) { v.problems.push_back(std::move(p)); };
  const std::string hash = m.value("scenario_hash", "");
  if (hash.empty()) problem("manifest lacks a scenario hash");
  if (m.value("code_version", "") != code_version())
    v.notes.push_back("artifacts written by code version " + m.value("code_version", "?") + ", verifier is " +
                      code_version());
  if (m.contains("failed_stage")) problem("run failed in stage " + m["failed_stage"].get<std::string>());

  // Hashes and stamps.
  std::map<std::string, Eigen::ArrayXd> fields;
  for (auto it = m.at("artifacts").begin(); it != m.at("artifacts").end(); ++it) {
    const std::string name = it.key();
    const fs::path file = dir / name;
    if (!fs::exists(file)) {
      problem(name + ": missing");
      continue;
    }
    const std::string bytes = read_text(file);
    if (sha256_hex(bytes) != it.value().get<std::string>()) problem(name + ": content hash differs from the manifest");
    try {
      if (name == "scenario.json") {
        if (sha256_hex(json::parse(bytes).dump()) != hash) problem(name + ": does not hash to the scenario hash");
      } else if (name.ends_with(".json")) {
        const json j = json::parse(bytes);
        if (j.value("scenario_hash", "") != hash) problem(name + ": stamp does not match the manifest");
      } else if (name.ends_with(".csv")) {
        if (bytes.rfind(stamp_line(hash), 0) != 0) problem(name + ": stamp line does not match the manifest");
      } else if (bytes.rfind("PWINVDS1", 0) == 0) {
        const BoundaryDataset d = read_dataset(file);
        if (d.scenario_hash != hash) problem(name + ": dataset stamp does not match the manifest");
        for (double x : d.data)
          if (!std::isfinite(x)) {
            problem(name + ": non-finite trace value");
            break;
          }
      } else if (bytes.rfind("PWINVFD1", 0) == 0) {
        json h;
        Eigen::ArrayXd f = read_field(file, &h);
        if (h.value("scenario_hash", "") != hash) problem(name + ": field stamp does not match the manifest");
        if (!f.isFinite().all()) problem(name + ": non-finite values");
        fields[name.substr(0, name.size() - 4)] = std::move(f);
      }
    } catch (const std::exception& e) {
      problem(name + ": " + e.what());
    }
  }

  // Recorded numbers recomputed from the stored data.
  std::map<std::string, double> recomputed;
  const auto has = [&](const char* a) { return m["artifacts"].contains(a) && fs::exists(dir / a); };
  try {
    if (has("identity_residuals.json")) {
      double wt = 0, wf = 0;
      bool any_t = false, any_f = false;
      for (const json& e : read_json(dir / "identity_residuals.json")["residuals"]) {
        const cplx val = jc(e["value"]), ref = jc(e["reference"]);
        const std::string id = e["identity_id"].get<std::string>();
        const double rel = id == "time_green" ? std::abs(val - ref) / std::abs(ref) : std::abs(val - ref) / std::abs(val);
        if (!close(rel, e["relative_residual"].get<double>()))
          problem("identity_residuals.json: stored residual of " + id + " " + params_text(e["params"]) +
                  " does not match its values");
        if (id == "freq_green") {
          const json& c = e["components"];
          if (std::abs(jc(c["source"]) - jc(c["remainder"]) - jc(c["gradient"]) - ref) > 1e-12 * std::abs(ref))
            problem("identity_residuals.json: components of " + params_text(e["params"]) + " do not sum up");
          wf = std::max(wf, rel);
          any_f = true;
        } else {
          cplx sum = 0;
          for (auto it = e["components"].begin(); it != e["components"].end(); ++it) sum += jc(it.value());
          if (std::abs(sum - ref) > 1e-12 * std::abs(ref))
            problem("identity_residuals.json: components of " + params_text(e["params"]) + " do not sum up");
          wt = std::max(wt, rel);
          any_t = true;
        }
      }
      if (any_t) recomputed["time_identity"] = wt;
      if (any_f) recomputed["freq_identity"] = wf;
    }
    if (has("decay_fits.json")) {
      double worst = -std::numeric_limits<double>::infinity();
      for (const json& e : read_json(dir / "decay_fits.json")["fits"]) {
        std::vector<std::pair<double, double>> smp;
        for (const json& p : e["samples"]) smp.emplace_back(p[0].get<double>(), p[1].get<double>());
        const DecayFit fit = fit_decay_exponent(smp);
        const std::string q = e["quantity"].get<std::string>();
        if (!close(fit.slope, e["slope"].get<double>())) problem("decay_fits.json: slope of " + q + " does not refit");
        if (q == "remainder_l2") recomputed["remainder_slope"] = fit.slope;
        if (q.rfind("f_error", 0) == 0) worst = std::max(worst, fit.slope);
      }
      if (std::isfinite(worst)) recomputed["f_error_slope"] = worst;
    }
    if (has("reconstruction.json")) {
      const json r = read_json(dir / "reconstruction.json");
      for (const char* fld : {"q0", "f"}) {
        if (!r.contains(fld)) continue;
        const std::string a = fld, t = a + "_true";
        if (!fields.count(a) || !fields.count(t)) {
          problem("reconstruction.json: " + a + " fields missing");
          continue;
        }
        const double rel = rel_err(fields[a], fields[t]);
        const double mx = (fields[a] - fields[t]).abs().maxCoeff();
        if (!close(rel, r[fld]["rel_l2"].get<double>()) || !close(mx, r[fld]["max_err"].get<double>()))
          problem("reconstruction.json: " + a + " errors do not match the stored fields");
        recomputed[a + "_rel_l2"] = rel;
        if (a == "q0" && r[fld].contains("oracle_gain_min")) recomputed["oracle_gain"] = min_oracle_gain(r[fld]["modes"]);
      }
      if (r.contains("c")) {
        if (!fields.count("c") || !fields.count("c_true") || !fields.count("mask")) {
          problem("reconstruction.json: c fields missing");
        } else {
          const Eigen::ArrayXd &c = fields["c"], &ct = fields["c_true"], &mk = fields["mask"];
          double e = 0, t = 0, mx = 0;
          std::size_t cells = 0, outside = 0;
          for (Eigen::Index i = 0; i < c.size(); ++i) {
            if (mk[i] != 0) {
              e += (c[i] - ct[i]) * (c[i] - ct[i]);
              t += ct[i] * ct[i];
              mx = std::max(mx, std::abs(c[i] - ct[i]));
              ++cells;
            } else if (c[i] != 1.0) {
              ++outside;
            }
          }
          if (outside) problem("c.bin: " + std::to_string(outside) + " cells outside the mask differ from 1");
          if (cells != r["c"]["mask_cells"].get<std::size_t>()) problem("mask.bin: cell count differs from the record");
          const double rel = cells ? std::sqrt(e / t) : 0.0;
          if (!close(rel, r["c"]["rel_l2"].get<double>()) || !close(mx, r["c"]["max_err"].get<double>()))
            problem("reconstruction.json: c errors do not match the stored fields");
          recomputed["c_rel_l2"] = rel;
        }
      }
    }
  } catch (const std::exception& e) {
    problem(std::string("while recomputing: ") + e.what());
  }

  // Check values and verdicts.
  bool all = true;
  for (const json& cj_ : m.at("checks")) {
    const Check c = check_from_json(cj_);
    const Check redo = make_check(c.name, c.value, c.relation, c.limit);
    if (redo.pass != c.pass) problem("check " + c.name + ": recorded verdict contradicts value and limit");
    const auto it = recomputed.find(c.name);
    if (it != recomputed.end() && !close(it->second, c.value))
      problem("check " + c.name + ": value " + g6(c.value) + " differs from the recomputed " + g6(it->second));
    all = all && c.pass;
  }
  if (m.contains("failed_stage")) all = false;
  if (m.value("all_pass", !all) != all) problem("manifest all_pass contradicts its checks");
  v.checks_pass = all;
  return v;
}

}  // namespace pwinv::cli
