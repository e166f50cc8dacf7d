#include <doctest.h>

#include "pwinv/cli.hpp"
#include "pwinv/io.hpp"

#include <cstdlib>
#include <fstream>

using namespace pwinv;
using namespace pwinv::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "pwinv_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d.parent_path());
  return d;
}

json zero_doc() {
  return json::parse(R"({
    "name": "zero", "seed": 3,
    "phantom": {"name": "zero", "grid_n": 32, "omega_half_width": 1.9},
    "solver": {"T": 6.0, "record_dataset": true},
    "stages": ["simulate"]})");
}

json separated_doc() {
  return json::parse(R"({
    "name": "small_separated", "seed": 11,
    "phantom": {"name": "sep", "grid_n": 32, "omega_half_width": 1.9,
      "profile": {"axis": 2, "longitudinal_kind": "gaussian", "a": -1.3, "b": 1.3, "width": 0.3},
      "bumps": [
        {"field": "q0", "kind": "gaussian", "center": [0, 0], "radius": 0.5, "amplitude": 1.0, "cutoff": [0.8, 1.0]},
        {"field": "c", "kind": "plateau", "center": [0, 0, 0], "radius": 1.3, "taper": 0.3,
         "longitudinal_radius": 1.2, "longitudinal_width": 0.3, "amplitude": 0.2}]},
    "solver": {"T": 161.0, "dt": 0.08},
    "spectral": {"k": [3, 4, 5, 6]},
    "cgo": {"tau": [0.07, 0.12], "verify_phases": [[0, 0.5], [1, -0.5]]},
    "inversion": {"quotient_box": 4, "source_box": 3},
    "checks": {"time_identity": 1e-3, "freq_identity": 1e-3, "q0_rel_l2": 0.15}})");
}

std::string path_of(const json& doc) {
  try {
    const Scenario s = parse_scenario(doc);
    const auto [t, f] = build_phantoms(s);
    validate_scenario(s, t, f);
  } catch (const ValidationError& e) {
    return e.path;
  }
  return "";
}

const RunSummary& separated_run() {
  static const RunSummary r = run_scenario(parse_scenario(separated_doc()), scratch("sep"));
  return r;
}

}  // namespace

TEST_CASE("validation names the offending field") {
  json d = zero_doc();
  d["solver"]["cfl"] = 1.5;
  CHECK(path_of(d) == "solver.cfl");
  try {
    parse_scenario(d);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1.5") != std::string::npos);
  }

  d = zero_doc();
  d["solver"]["cfll"] = 0.5;
  CHECK(path_of(d) == "solver.cfll");
  d = zero_doc();
  d["stages"] = {"transform", "simulate"};
  CHECK(path_of(d) == "stages[1]");
  d = zero_doc();
  d["stages"] = {"simulate", "verify"};
  CHECK(path_of(d) == "stages");

  d = separated_doc();
  d["cgo"]["tau"] = {0.01, 0.1};  // tau T = 1.61
  CHECK(path_of(d) == "cgo.tau[0]");
  d = separated_doc();
  d["solver"]["T"] = 20.0;
  d["cgo"]["tau"] = {0.5, 0.8};  // 2 tau^2 max(1/c^2) > 1
  d["checks"].erase("q0_rel_l2");
  CHECK(path_of(d) == "cgo.tau[1]");
  d = separated_doc();
  d["spectral"]["k"] = {3, 4, 5, 7};  // dt k = 0.56
  CHECK(path_of(d) == "spectral.k[3]");
  d = separated_doc();
  d["solver"]["dt"] = 0.5;
  CHECK(path_of(d) == "solver.dt");
  d = separated_doc();
  d["checks"]["q0_l2"] = 0.1;
  CHECK(path_of(d) == "checks.q0_l2");
  d = separated_doc();
  d["checks"]["remainder_slope"] = -2.0;
  d["spectral"]["k"] = {3, 4, 5};
  CHECK(path_of(d) == "checks.remainder_slope");
  d = separated_doc();
  d["inversion"]["theta"] = 0.0;
  CHECK(path_of(d) == "inversion.theta");
  d = separated_doc();
  d["phantom"]["bumps"][0]["radius"] = "wide";
  CHECK(path_of(d) == "phantom");
  CHECK(path_of(separated_doc()).empty());
}

TEST_CASE("scenario hash covers defaults") {
  const Scenario a = parse_scenario(zero_doc());
  json d = zero_doc();
  d["solver"]["cfl"] = 0.9;  // the default, spelled out
  CHECK(parse_scenario(d).hash == a.hash);
  d["seed"] = 4;
  CHECK(parse_scenario(d).hash != a.hash);
  CHECK(a.hash.size() == 64);
}

TEST_CASE("simulate-only zero phantom writes a dataset of zeros") {
  const fs::path dir = scratch("zero");
  const RunSummary r = run_scenario(parse_scenario(zero_doc()), dir);
  CHECK(r.all_pass);
  const BoundaryDataset d = read_dataset(dir / "dataset.bin");
  CHECK(d.frames() > 1);
  CHECK(d.scenario_hash == r.manifest["scenario_hash"]);
  bool zeros = true;
  for (double x : d.data) zeros = zeros && x == 0.0;
  CHECK(zeros);
  CHECK(verify_artifacts(dir).ok());

  // Re-running gives the same bytes.
  const std::string first = read_text(dir / "dataset.bin");
  run_scenario(parse_scenario(zero_doc()), dir);
  CHECK(read_text(dir / "dataset.bin") == first);
}

TEST_CASE("report needs an artifact set and is deterministic") {
  const fs::path empty = scratch("empty");
  fs::create_directories(empty);
  try {
    report_artifacts(empty);
    FAIL("expected a missing artifact");
  } catch (const IOError& e) {
    CHECK(e.kind == "missing-artifact");
  }
  const fs::path dir = separated_run().dir;
  const std::string a = report_artifacts(dir);
  const std::string checks = read_text(dir / "report_checks.csv");
  const std::string modes = read_text(dir / "report_modes.csv");
  CHECK(report_artifacts(dir) == a);
  CHECK(read_text(dir / "report_checks.csv") == checks);
  CHECK(read_text(dir / "report_modes.csv") == modes);
  CHECK(a.find("PASS  time_identity") != std::string::npos);
  CHECK(a.find("identity residuals") != std::string::npos);
  CHECK(a.find("reconstruction errors") != std::string::npos);
}

TEST_CASE("separated pipeline at n = 32") {
  const RunSummary& r = separated_run();
  const json& m = r.manifest;
  CHECK(r.all_pass);
  CHECK(m["checks"].size() == 3);
  for (const char* a : {"scenario.json", "decay.csv", "simulation.json", "transforms.json",
                        "identity_residuals.json", "modes_q0.csv", "modes_f.csv", "q0.bin", "f.bin", "c.bin",
                        "mask.bin", "reconstruction.json"})
    CHECK_MESSAGE(m["artifacts"].contains(a), a);
  const json rec = read_json(r.dir / "reconstruction.json");
  // A 4-mode box at n = 32 truncates q0 to about 13 %.
  CHECK(rec["q0"]["rel_l2"].get<double>() < 0.15);
  CHECK_FALSE(m["artifacts"].contains("decay_fits.json"));  // k spans less than a factor 3
  CHECK(rec.contains("c"));
  const json ids = read_json(r.dir / "identity_residuals.json")["residuals"];
  CHECK(ids.size() == 2 * 2 + 4 * 2);
  for (const json& e : ids) {
    CHECK(e.contains("identity_id"));
    CHECK(e.contains("params"));
    CHECK(e.contains("components"));
    CHECK(e.contains("tail_bound"));
    CHECK(e.contains("relative_residual"));
  }
  const std::string csv = read_text(r.dir / "modes_q0.csv");
  CHECK(csv.rfind(stamp_line(m["scenario_hash"]), 0) == 0);
  const VerifyResult v = verify_artifacts(r.dir);
  CHECK(v.problems.empty());
  CHECK(v.ok());
}

TEST_CASE("verify detects tampering") {
  const fs::path src = separated_run().dir;
  const fs::path dir = scratch("tampered");
  fs::copy(src, dir, fs::copy_options::recursive);
  REQUIRE(verify_artifacts(dir).ok());

  SUBCASE("field bytes") {
    std::string b = read_text(dir / "q0.bin");
    b[b.size() - 3] ^= 1;
    write_text(dir / "q0.bin", b);
    const VerifyResult v = verify_artifacts(dir);
    CHECK_FALSE(v.ok());
    CHECK(v.problems.size() >= 2);  // hash, then the recomputed error
  }
  SUBCASE("check verdict") {
    json m = read_json(dir / "manifest.json");
    m["checks"][0]["value"] = 1.0;
    write_json(dir / "manifest.json", m);
    CHECK_FALSE(verify_artifacts(dir).problems.empty());
  }
  SUBCASE("missing artifact") {
    fs::remove(dir / "mask.bin");
    CHECK_FALSE(verify_artifacts(dir).ok());
    CHECK_THROWS_AS(report_artifacts(dir), IOError);
  }
}

TEST_CASE("stage failures carry the stage name") {
  json d = separated_doc();
  d["inversion"]["quotient_degeneracy"] = 1e6;
  const fs::path dir = scratch("failing");
  try {
    run_scenario(parse_scenario(d), dir);
    FAIL("expected a stage failure");
  } catch (const StageError& e) {
    CHECK(e.stage == "reconstruct");
    CHECK(std::string(e.what()).find("degenerate-divisor") != std::string::npos);
  }
  const json m = read_json(dir / "manifest.json");
  CHECK(m["failed_stage"] == "reconstruct");
  CHECK(m["all_pass"] == false);
  CHECK_FALSE(verify_artifacts(dir).ok());
}

TEST_CASE("noise is seeded") {
  json d = separated_doc();
  d["solver"]["record_dataset"] = true;
  d["noise"] = {{"level", 1e-3}};
  d["stages"] = {"simulate", "transform", "reconstruct"};
  d["checks"] = json::object();
  d["spectral"]["k"] = json::array();
  const auto a = run_scenario(parse_scenario(d), scratch("noise_a"));
  const auto b = run_scenario(parse_scenario(d), scratch("noise_b"));
  d["seed"] = 12;
  const auto c = run_scenario(parse_scenario(d), scratch("noise_c"));
  const std::string ra = read_text(a.dir / "modes_q0.csv");
  CHECK(ra == read_text(b.dir / "modes_q0.csv"));
  CHECK(read_json(a.dir / "reconstruction.json")["q0"]["rel_l2"] !=
        read_json(c.dir / "reconstruction.json")["q0"]["rel_l2"]);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cmd");
  fs::create_directories(dir);
  json bad = zero_doc();
  bad["solver"]["cfl"] = 1.5;
  write_json(dir / "bad.json", bad);
  write_json(dir / "zero.json", zero_doc());
  const std::string badf = (dir / "bad.json").string(), zf = (dir / "zero.json").string();
  const std::string out = (dir / "out").string(), nothing = (dir / "nothing").string();
  auto call = [](std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return pwinv::cli::main(int(argv.size()), argv.data());
  };
  CHECK(call({"pwinv", "run", badf}) == 2);
  CHECK(call({"pwinv", "run", "-q", zf, "--out", out}) == 0);
  CHECK(call({"pwinv", "verify", out}) == 0);
  CHECK(call({"pwinv", "report", out}) == 0);
  CHECK(call({"pwinv", "report", nothing}) == 2);
  CHECK(call({"pwinv", "bogus"}) == 2);
  ::setenv("PWINV_THREADS", "-1", 1);
  CHECK(call({"pwinv", "verify", out}) == 2);
  ::unsetenv("PWINV_THREADS");
}
