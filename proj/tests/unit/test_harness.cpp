#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ionhom/errors.hpp"
#include "ionhom/harness.hpp"

using namespace ionhom;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ionhom_test_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return static_cast<int>(k);
  }
  return -1;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

Config quick_study(const std::string& extra) {
  return parse_config(
      "run.T_end = 0.02\n"
      "geometry.n_per_cell = 8\n"
      "init.perturbation = 0.2\n" +
      extra);
}

}  // namespace

TEST_CASE("config echo round trip and hash") {
  const Config a = parse_config("physics.G.Na = 0.5\nrun.dt = 2e-3\n# comment\n\ngeometry.shape = cross\n");
  CHECK(a.params.conductance[0] == 0.5);
  CHECK(a.run.dt == 2e-3);
  const Config b = parse_config(echo_config(a));
  CHECK(echo_config(a) == echo_config(b));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(default_config()));
  CHECK(hash_hex(config_hash(a)).size() == 16);
  CHECK(parse_config("run.epsilon = 0.25").run.epsilon_inv == 4);
}

TEST_CASE("invalid configs are rejected") {
  CHECK(kind_of([] { parse_config("run.bogus = 1"); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { parse_config("run.epsilon = 0.3"); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { parse_config("run.dt = fast"); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { parse_config("no equals sign"); }) == ErrorKind::InvalidInput);
  const fs::path out = scratch("bad");
  Config cfg = default_config();
  cfg.run.dt = -1.0;
  CHECK_THROWS_AS(run_single(cfg, out), Error);
}

TEST_CASE("validation report flags violated assumptions") {
  CHECK(validate_config(default_config()).ok());
  const Config bad = parse_config("init.C_E.Cl = 100");
  CHECK_FALSE(validate_config(bad).ok());
}

TEST_CASE("cell-problem run writes the tensor table") {
  const fs::path out = scratch("cell");
  const RunSummary r = run_single(parse_config("run.mode = cell-problem\ngeometry.n_per_cell = 32"), out);
  const auto rows = read_csv(out / "tensor.csv");
  REQUIRE(rows.size() == 11);
  CHECK(rows[0] == std::vector<std::string>{"subdomain", "entry", "value"});
  int symmetry = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k][1] == "symmetry") {
      ++symmetry;
      CHECK(std::stod(rows[k][2]) <= 1e-10);
    }
  }
  CHECK(symmetry == 2);
  CHECK(fs::exists(out / "manifest.txt"));
  CHECK(fs::exists(out / "tags.csv"));
}

TEST_CASE("default macro run keeps electroneutrality") {
  const fs::path out = scratch("macro");
  run_single(parse_config("run.mode = macro-con-discon"), out);
  const auto rows = read_csv(out / "diagnostics.csv");
  REQUIRE(rows.size() > 2);
  const int en = column(rows[0], "en_drift");
  REQUIRE(en >= 0);
  double worst = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) worst = std::max(worst, std::stod(rows[k][en]));
  CHECK(worst <= 1e-10);
  CHECK(rows.size() == 502);
}

TEST_CASE("degenerate study has no dynamics") {
  const fs::path out = scratch("degenerate");
  const Config cfg = parse_config(
      "run.T_end = 0.02\ngeometry.n_per_cell = 8\n"
      "physics.G.Na = 0\nphysics.G.K = 0\nphysics.G.Cl = 0\nphysics.P_m = 0\n"
      "pump.I_max1 = 0\npump.I_max2 = 0\n");
  const ConvergenceReport r = run_convergence_study(cfg, {2, 4}, out);
  REQUIRE(r.legs.size() == 2);
  for (const auto& leg : r.legs) {
    REQUIRE(leg.ok);
    for (const auto& f : leg.errors) {
      for (double e : f) CHECK(e <= 1e-10);
    }
  }
}

TEST_CASE("single-epsilon study reports no ratios") {
  const fs::path out = scratch("single");
  const ConvergenceReport r = run_convergence_study(quick_study(""), {2}, out);
  REQUIRE(r.legs.size() == 1);
  CHECK(std::isnan(r.ratio(0, 0, 0)));
  const auto rows = read_csv(out / "plot_error_v.csv");
  REQUIRE(rows.size() == 2);
  for (std::size_t k = 2; k < rows[1].size(); k += 2) CHECK(rows[1][k].empty());
}

TEST_CASE("plot data layout and ratio recheck") {
  const fs::path out = scratch("plot");
  const ConvergenceReport r = run_convergence_study(quick_study(""), {1, 2, 4}, out);
  REQUIRE(r.legs.size() == 3);
  for (const auto& name : r.fields) {
    const auto rows = read_csv(out / ("plot_error_" + name + ".csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0][0] == "epsilon");
    CHECK(rows[0].size() == 1 + 2 * r.snapshot_times.size());
    for (std::size_t k = 2; k < rows.size(); ++k) {
      for (std::size_t s = 0; s < r.snapshot_times.size(); ++s) {
        const double prev = std::stod(rows[k - 1][1 + 2 * s]);
        const double here = std::stod(rows[k][1 + 2 * s]);
        const double ratio = std::stod(rows[k][2 + 2 * s]);
        CHECK(ratio == doctest::Approx(here / prev).epsilon(1e-14));
      }
    }
    CHECK(std::stod(rows[1][0]) == 1.0);
    CHECK(std::stod(rows[3][0]) == 0.25);
  }
  const auto errors = read_csv(out / "errors.csv");
  CHECK(errors.size() == 1 + 3 * r.fields.size() * r.snapshot_times.size());
}

TEST_CASE("empty diagnostics give a header-only table") {
  const DiagnosticsRecord empty;
  CHECK(empty.csv() == DiagnosticsRecord::csv_header());
}

TEST_CASE("failed legs are marked and the study continues") {
  const fs::path out = scratch("failing");
  const Config cfg = parse_config(
      "run.T_end = 0.2\ngeometry.n_per_cell = 8\ninit.perturbation = 0.3\n"
      "run.picard_damping = 0.5\nrun.picard_max_iter = 26\n");
  const ConvergenceReport r = run_convergence_study(cfg, {1, 2, 4}, out);
  REQUIRE(r.legs.size() == 3);
  CHECK(r.legs[0].ok);
  CHECK_FALSE(r.legs[1].ok);
  CHECK_FALSE(r.legs[2].ok);
  CHECK_FALSE(r.monotone());
  CHECK(std::isnan(r.ratio(1, 0, 0)));
  for (int eps : {2, 4}) {
    const auto j = nlohmann::json::parse(slurp(out / ("eps_" + std::to_string(eps)) / "error.json"));
    CHECK(j.at("kind") == "PicardDivergence");
  }
  CHECK_FALSE(fs::exists(out / "eps_1" / "error.json"));
  CHECK(fs::exists(out / "eps_1" / "averaged_s3.csv"));
  const auto norms = read_csv(out / "norms_summary.csv");
  REQUIRE(norms.size() == 4);
  CHECK(norms[1][1] == "ok");
  CHECK(norms[2][1] == "failed");
}

TEST_CASE("identical configs give byte-identical outputs") {
  const fs::path a = scratch("repro_a");
  const fs::path b = scratch("repro_b");
  const Config cfg = quick_study("");
  run_convergence_study(cfg, {1, 2}, a);
  run_convergence_study(cfg, {1, 2}, b);
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "timing.txt") continue;
    const fs::path rel = fs::relative(entry.path(), a);
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / rel), rel.string());
    ++compared;
  }
  CHECK(compared > 10);
}

TEST_CASE("membrane probe table") {
  const std::string csv = membrane_probe_csv(default_config(), -1.0, 1.0, 5);
  std::istringstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 6);
}

TEST_CASE("error records are valid json") {
  const auto j = nlohmann::json::parse(error_json("InvalidInput", "bad \"quote\"\n"));
  CHECK(j.at("kind") == "InvalidInput");
  CHECK(j.at("message") == "bad \"quote\"\n");
}
