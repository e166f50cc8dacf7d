#include <doctest.h>

#include "pwinv/io.hpp"

#include <cmath>
#include <fstream>

using namespace pwinv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pwinv_test_io";
  fs::create_directories(dir);
  return dir / name;
}

BoundaryDataset small_dataset() {
  const auto cfg = build_phantom(R"({"grid_n":24,"omega_half_width":1.6,"sponge":{"cells":4},
    "bumps":[{"field":"f","kind":"bump","center":[0,0,0],"radius":0.8,"amplitude":1.0}]})");
  SolverSettings s;
  s.T = 1.0;
  auto d = simulate(cfg, s).dataset;
  d.scenario_hash = "abc123";
  return d;
}

}  // namespace

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("").substr(0, 8) == "e3b0c442");
}

TEST_CASE("dataset round trip and corrupt files") {
  const BoundaryDataset d = small_dataset();
  REQUIRE(d.frames() > 1);
  const fs::path file = scratch("d.bin");
  write_dataset(d, file);
  const BoundaryDataset r = read_dataset(file);
  CHECK(r.grid_n == d.grid_n);
  CHECK(r.dt == d.dt);
  CHECK(r.steps == d.steps);
  CHECK(r.scenario_hash == "abc123");
  CHECK(r.code_version == code_version());
  CHECK(r.layout.size() == d.layout.size());
  CHECK(r.layout.nodes.back().out == d.layout.nodes.back().out);
  CHECK(r.layout.nodes.back().sigma_face == d.layout.nodes.back().sigma_face);
  CHECK(r.data == d.data);

  // Truncation, trailing garbage and a wrong magic are all format errors.
  const std::string bytes = read_text(file);
  write_text(scratch("t.bin"), bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_dataset(scratch("t.bin")), IOError);
  write_text(scratch("g.bin"), bytes + "x");
  CHECK_THROWS_AS(read_dataset(scratch("g.bin")), IOError);
  std::string bad = bytes;
  bad[0] = 'Q';
  write_text(scratch("m.bin"), bad);
  try {
    read_dataset(scratch("m.bin"));
    FAIL("expected a format error");
  } catch (const IOError& e) {
    CHECK(e.kind == "format");
  }
  try {
    read_dataset(scratch("absent.bin"));
    FAIL("expected a missing artifact");
  } catch (const IOError& e) {
    CHECK(e.kind == "missing-artifact");
  }

  export_dataset_csv(d, scratch("d.csv"));
  std::ifstream is(scratch("d.csv"));
  std::string header;
  std::getline(is, header);
  CHECK(header == "frame,t,node,axis,sign,x,y,z,u,flux");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == d.frames() * d.layout.size());
}

TEST_CASE("field round trip keeps header and values") {
  Eigen::ArrayXd v(5);
  v << 1.0, -2.5, 0.0, 1e-300, std::nextafter(1.0, 2.0);
  write_field(scratch("f.bin"), v, {{"name", "q0"}, {"scenario_hash", "h"}});
  nlohmann::json h;
  const Eigen::ArrayXd r = read_field(scratch("f.bin"), &h);
  CHECK((r == v).all());
  CHECK(h["name"] == "q0");
  CHECK(h["size"] == 5);
  CHECK_THROWS_AS(read_field(scratch("d.bin")), IOError);
  write_json(scratch("j.json"), {{"a", 1}});
  CHECK(read_json(scratch("j.json"))["a"] == 1);
  write_text(scratch("bad.json"), "{");
  CHECK_THROWS_AS(read_json(scratch("bad.json")), IOError);
}
