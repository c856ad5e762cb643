#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dhamsim/scenario.hpp"
#include "dhamsim/selftest.hpp"
#include "oracles.hpp"

using namespace dhamsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dhamsim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

const char* kOscillator = R"({"kind": "oscillator", "params": {"m": 1, "k": 1, "mu": 0.1}})";

const char* kDamage = R"({
  "kind": "damage_dynamic",
  "params": {"K_e": 1, "gamma": 1, "c": 0.1, "beta": 0.1},
  "grid": {"n_nodes": 41},
  "loading": {"type": "ramp", "rate": 2.0},
  "time": {"t_end": 1.0},
  "output": {"snapshot_every": 20},
  "notch": {"depth": 0.2}
})";

}  // namespace

TEST_CASE("config defaults") {
  const ScenarioConfig cfg = parse_config(kOscillator);
  CHECK(cfg.kind == ScenarioKind::kOscillator);
  CHECK(cfg.param("q0") == 1.0);
  CHECK(cfg.param("p0") == 0.0);
  CHECK(cfg.time.t_end == doctest::Approx(20.0 * std::numbers::pi));
  CHECK(!cfg.time.dt);

  const ScenarioConfig d = parse_config(kDamage);
  CHECK(d.param("rho") == 1.0);
  CHECK(d.grid.n_nodes == 41);
  CHECK(d.grid.length == 1.0);
  CHECK(d.modulation == "quadratic");
  CHECK(d.time.cfl_factor == 0.5);
  REQUIRE(d.notch);
  CHECK(d.notch->center == 0.5);
}

TEST_CASE("config errors name the offending key") {
  try {
    parse_config(R"({"kind": "damage_dynamic", "params": {"K_e": 1, "c": 0.1, "beta": 0},
                     "loading": {"type": "hold"}})");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.key() == "gamma");
  }
  try {
    parse_config(R"({"kind": "damage_dynamic", "params": {"K_e": 1, "gamma": 1, "c": -1,
                     "beta": 0}, "loading": {"type": "hold"}})");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("c must be positive") != std::string::npos);
  }
  try {
    parse_config(R"({"kind": "oscillator", "params": {"m": 1, "k": 1, "mu": 0.1}, "colour": 1})");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.key() == "colour");
  }
  try {
    parse_config(R"({"kind": "oscillator", "params": {"m": 1,, }})");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() > 0);
    CHECK(e.position() <= 50);
  }
  CHECK_THROWS_AS(parse_config(R"({"kind": "pendulum"})"), SchemaError);
  CHECK_THROWS_AS(parse_config(R"({"kind": "oscillator", "params": {"m": 1, "k": 1, "mu": 0.1},
                                   "time": {"cfl_factor": 1.5}})"),
                  SchemaError);
  CHECK_THROWS_AS(load_config("/nonexistent/dir/config.json"), IoError);
}

TEST_CASE("config round trip") {
  for (const char* text : {kOscillator, kDamage}) {
    const ScenarioConfig cfg = parse_config(text);
    const std::string canonical = serialize_config(cfg);
    const ScenarioConfig again = parse_config(canonical);
    CHECK(again == cfg);
    CHECK(serialize_config(again) == canonical);
  }
}

TEST_CASE("output directory precedence") {
  ScenarioConfig cfg = parse_config(kOscillator);
  CHECK(resolve_output_dir(cfg, std::string("a")) == fs::path("a"));
  cfg.output.dir = "b";
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("b"));
  CHECK(resolve_output_dir(cfg, std::string("a")) == fs::path("a"));
}

TEST_CASE("peak detection") {
  std::vector<double> t, q;
  for (int i = 0; i <= 4000; ++i) {
    t.push_back(i * 1e-2);
    q.push_back(std::exp(-0.05 * t.back()) * std::cos(t.back()));
  }
  const std::vector<Peak> peaks = positive_peaks(t, q);
  REQUIRE(peaks.size() >= 5);
  CHECK(peaks[0].value == doctest::Approx(1.0));
  CHECK(peaks[0].t == 0.0);
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    CHECK(peaks[i].value < peaks[i - 1].value);
  }
}

TEST_CASE("oscillator run matches the exact stick-slip motion") {
  const fs::path dir = fresh_dir("osc");
  const RunReport rep = run_scenario(parse_config(kOscillator), dir);
  CHECK(rep.exit_code == kExitOk);
  const json summary = read_json(dir / "summary.json");
  CHECK(summary["status"] == "ok");
  CHECK(summary["front_speed"].is_null());
  const oracle::CoulombExact exact;
  const std::vector<double> peaks = exact.positive_peaks();
  const json& table = summary["amplitude_per_period"];
  REQUIRE(table.size() == peaks.size());
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    CHECK(table[i]["amplitude"].get<double>() == doctest::Approx(peaks[i]).epsilon(1e-3));
  }
  CHECK(std::abs(summary["final_q"].get<double>()) <= 0.1 + 1e-3);
  CHECK(summary["min_eta_minus_dissipation"].get<double>() >= -1e-9);

  std::ifstream ledger(dir / "ledger.csv");
  std::string header;
  std::getline(ledger, header);
  CHECK(header == "t,q,p,hamiltonian,dissipated,work,residual,eta");
}

TEST_CASE("damage runs write ledger, snapshots and summary") {
  const fs::path dir = fresh_dir("damage");
  const RunReport rep = run_scenario(parse_config(kDamage), dir);
  CHECK(rep.exit_code == kExitOk);
  const json summary = read_json(dir / "summary.json");
  CHECK(summary["status"] == "ok");
  CHECK(summary["constraint_violations"]["damage_decrease"] == 0);
  CHECK(summary["total_dissipated"].get<double>() > 0.0);
  CHECK(summary["speed_estimate"].get<double>() == doctest::Approx(std::sqrt(1.01)));
  CHECK(fs::exists(dir / "ledger.csv"));
  CHECK(fs::exists(dir / "snap_00000.csv"));

  std::ifstream snap(dir / "snap_00000.csv");
  std::string line;
  std::getline(snap, line);
  CHECK(line.rfind("# t=", 0) == 0);
  std::getline(snap, line);
  CHECK(line == "x,u,p,d,y");

  // Identical bytes on a rerun.
  const fs::path again = fresh_dir("damage_again");
  run_scenario(parse_config(kDamage), again);
  CHECK(slurp(dir / "summary.json") == slurp(again / "summary.json"));
  CHECK(slurp(dir / "ledger.csv") == slurp(again / "ledger.csv"));
}

TEST_CASE("sub-threshold loading dissipates nothing") {
  ScenarioConfig cfg = parse_config(kDamage);
  cfg.params["beta"] = 10.0;
  cfg.notch.reset();
  const fs::path dir = fresh_dir("quiet");
  CHECK(run_scenario(cfg, dir).exit_code == kExitOk);
  CHECK(read_json(dir / "summary.json")["total_dissipated"].get<double>() == 0.0);
}

TEST_CASE("quasistatic run") {
  ScenarioConfig cfg = parse_config(kDamage);
  cfg.kind = ScenarioKind::kDamageQuasistatic;
  cfg.grid.n_nodes = 21;
  cfg.time.dt = 0.05;
  cfg.notch.reset();
  const fs::path dir = fresh_dir("qs");
  CHECK(run_scenario(cfg, dir).exit_code == kExitOk);
  const json summary = read_json(dir / "summary.json");
  CHECK(summary["front_speed"].is_null());
  CHECK(summary["max_stability_violation"].get<double>() <= 1e-6);
}

TEST_CASE("sweep over c") {
  ScenarioConfig cfg = parse_config(R"({
    "kind": "sweep",
    "params": {"K_e": 1, "gamma": 1, "beta": 0.1},
    "grid": {"n_nodes": 41},
    "loading": {"type": "ramp", "rate": 2.0},
    "time": {"t_end": 1.0},
    "notch": {"depth": 0.2},
    "sweep": {"base": "damage_dynamic", "c": [0.2, 0.1, 0.05]}
  })");
  const fs::path dir = fresh_dir("sweep");
  CHECK(run_sweep(cfg, dir).exit_code == kExitOk);
  CHECK(fs::exists(dir / "c_0.2" / "summary.json"));
  CHECK(fs::exists(dir / "c_0.1" / "summary.json"));
  CHECK(fs::exists(dir / "c_0.05" / "summary.json"));
  std::ifstream csv(dir / "sweep.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "c,band_width,front_speed,max_residual");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
  CHECK(read_json(dir / "sweep.json").contains("width_nonincreasing_as_c_decreases"));
}

TEST_CASE("unwritable output directory raises IoError") {
  const fs::path blocker = fresh_dir("blocker") / "file";
  std::ofstream(blocker) << "x";
  CHECK_THROWS_AS(run_scenario(parse_config(kOscillator), blocker / "sub"), IoError);
}

TEST_CASE("blow-up keeps partial outputs and reports a numerical failure") {
  ScenarioConfig cfg = parse_config(kDamage);
  cfg.loading = {"sine", 0.1, 5.0};
  cfg.params["beta"] = 1e300;
  cfg.notch.reset();
  cfg.time.dt = 0.5;
  cfg.time.t_end = 2000.0;
  const fs::path dir = fresh_dir("blowup");
  const RunReport rep = run_scenario(cfg, dir);
  CHECK(rep.exit_code == kExitNumerical);
  CHECK(read_json(dir / "summary.json")["status"] == "blowup");
  CHECK(fs::exists(dir / "ledger.csv"));
}

TEST_CASE("selftest is deterministic and honours failure injection") {
  const auto rows = run_selftest();
  for (const SelftestRow& r : rows) CHECK_MESSAGE(r.passed, r.name);
  CHECK(format_selftest(rows) == format_selftest(run_selftest()));
  SelftestOptions opts;
  opts.inject_failure = "coulomb_terminal";
  int failed = 0;
  for (const SelftestRow& r : run_selftest(opts)) failed += r.passed ? 0 : 1;
  CHECK(failed == 1);
  opts.inject_failure = "nope";
  CHECK_THROWS_AS(run_selftest(opts), DomainError);
}
