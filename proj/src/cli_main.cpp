#include "pwinv/cli.hpp"
#include "pwinv/io.hpp"
#include "pwinv/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace pwinv::cli {

// Exit codes: 0 all checks pass, 1 a check failed or an invariant broke,
// 2 the input could not be processed.
int main(int argc, char** argv) {
  CLI::App app{"Passive boundary observation: forward runs, identities and reconstructions"};
  app.set_version_flag("--version", code_version());
  app.require_subcommand(1);

  std::string scenario_file, out_dir, dir;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run the pipeline stages of a scenario file");
  run->add_option("scenario", scenario_file, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Artifact directory (default: the scenario's output)");
  run->add_flag("-q,--quiet", quiet, "Suppress progress lines and the report");
  auto* report = app.add_subcommand("report", "Summarize an artifact directory");
  report->add_option("dir", dir, "Artifact directory")->required();
  auto* verify = app.add_subcommand("verify", "Re-check the invariants of stored artifacts");
  verify->add_option("dir", dir, "Artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    (void)thread_count();
    if (*run) {
      const Scenario s = load_scenario(scenario_file);
      const RunSummary r = run_scenario(s, out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir),
                                        quiet ? nullptr : &std::cerr);
      std::cout << "artifacts in " << r.dir.string() << ": " << (r.all_pass ? "all checks pass" : "checks failed")
                << "\n";
      return r.all_pass ? 0 : 1;
    }
    if (*report) {
      std::cout << report_artifacts(dir);
      return 0;
    }
    if (*verify) {
      const VerifyResult v = verify_artifacts(dir);
      for (const auto& p : v.problems) std::cout << "problem: " << p << "\n";
      for (const auto& n : v.notes) std::cout << "note: " << n << "\n";
      std::cout << (v.ok() ? "verified: invariants hold and all checks pass"
                           : v.problems.empty() ? "verified: invariants hold, but checks fail"
                                                : "verification failed")
                << "\n";
      return v.ok() ? 0 : 1;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
  } catch (const StageError& e) {
    std::cerr << "error in stage " << e.stage << ": " << e.what() << "\n";
  } catch (const IOError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 2;
}

}  // namespace pwinv::cli
