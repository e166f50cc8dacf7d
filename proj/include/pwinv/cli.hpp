#pragma once

#include "pwinv/forward.hpp"
#include "pwinv/spectral.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pwinv::cli {

/// Scenario rejected before any stage runs; `path` names the offending field
/// (e.g. "solver.cfl", "cgo.tau[1]").
struct ValidationError : std::runtime_error {
  std::string path;
  ValidationError(std::string p, const std::string& msg)
      : std::runtime_error(p + ": " + msg), path(std::move(p)) {}
};

/// A pipeline stage failed; the message carries the underlying error.
struct StageError : std::runtime_error {
  std::string stage;
  StageError(std::string s, const std::string& msg)
      : std::runtime_error("stage " + s + ": " + msg), stage(std::move(s)) {}
};

struct SolverBlock {
  int grid_n = 0;  // 0: the phantom's own grid
  double cfl = 0.9;
  double dt = 0.0;  // overrides cfl when positive
  double T = 0.0;
  TimeRule rule = TimeRule::trapezoid;
  bool absorbing = true;
  bool record_dataset = false;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  nlohmann::json phantom;
  SolverBlock solver;
  // spectral
  std::vector<double> ks;
  Window window = Window::hard_cut;
  std::optional<SolverBlock> spectral_solver;  // separate run for the frequencies
  std::vector<std::array<double, 2>> plane_modes;
  // cgo
  std::vector<double> taus;
  std::vector<std::array<double, 2>> verify_phases;
  // inversion
  int quotient_box = 6, source_box = 6;
  double theta = 0.3;
  double quotient_degeneracy = 1e-8, source_degeneracy = 1e-12;
  bool oracle = false;
  double noise = 0.0;  // relative Gaussian noise on the recorded traces
  std::vector<std::pair<std::string, double>> checks;  // name -> limit, sorted
  std::vector<std::string> stages;
  std::string output;

  nlohmann::json canonical;  // fully defaulted form; hashed
  std::string hash;

  bool has_stage(const std::string& s) const;
};

/// Names of the pipeline stages in execution order.
const std::vector<std::string>& stage_order();

/// Parses and checks a scenario document. Relative phantom paths resolve
/// against `base`. Throws ValidationError.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base = {});
Scenario load_scenario(const std::filesystem::path& file);

/// Phantoms of the time run and of the frequency run (the same grid unless
/// spectral.solver.grid_n differs). Throws ValidationError("phantom").
std::pair<Configuration, Configuration> build_phantoms(const Scenario& s);

/// Cross-module constraints (CFL, k h, tau T, corrector smallness) against
/// the built phantoms. Throws ValidationError.
void validate_scenario(const Scenario& s, const Configuration& time_cfg,
                       const Configuration& freq_cfg);

/// One recorded pass/fail check: pass iff value <relation> limit.
struct Check {
  std::string name;
  double value = 0.0;
  std::string relation = "<=";
  double limit = 0.0;
  bool pass = false;
  std::string detail;
};
Check make_check(std::string name, double value, std::string relation, double limit,
                 std::string detail = {});
nlohmann::json to_json(const Check& c);
Check check_from_json(const nlohmann::json& j);

/// "# scenario_hash=<h> code_version=<v>" plus newline; first line of every CSV artifact.
std::string stamp_line(const std::string& hash);

/// Writes manifest.json: stamp, stages, artifact hashes, checks and their conjunction.
nlohmann::json write_manifest(const std::filesystem::path& dir, const std::string& name,
                              const std::string& hash, const std::vector<std::string>& stages,
                              const std::vector<std::string>& artifacts,
                              const std::vector<Check>& checks,
                              const std::vector<std::string>& notes = {},
                              const std::string& failed_stage = {});

struct RunSummary {
  std::filesystem::path dir;
  nlohmann::json manifest;
  bool all_pass = false;
};

/// Builds, validates and runs the scenario; artifacts go to `out` (default:
/// the scenario's output). Progress lines go to `log` when given.
RunSummary run_scenario(const Scenario& s, const std::optional<std::filesystem::path>& out = {},
                        std::ostream* log = nullptr);

/// Writes report.txt and the report_*.csv tables next to the manifest and
/// returns the summary text. Throws IOError("missing-artifact") without a
/// manifest.
std::string report_artifacts(const std::filesystem::path& dir);

struct VerifyResult {
  std::vector<std::string> problems;  // broken invariants
  std::vector<std::string> notes;
  bool checks_pass = false;
  bool ok() const { return problems.empty() && checks_pass; }
};

/// Re-checks the stored artifacts: hashes, stamps, finiteness, recorded
/// errors recomputed from the fields, check values and verdicts.
VerifyResult verify_artifacts(const std::filesystem::path& dir);

/// Entry point of the pwinv executable.
int main(int argc, char** argv);

}  // namespace pwinv::cli
