#include "dhamsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dhamsim/integrators.hpp"

namespace dhamsim {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

bool is_damage_kind(ScenarioKind k) {
  return k == ScenarioKind::kDamageDynamic || k == ScenarioKind::kDamageQuasistatic;
}

ScenarioKind kind_from_string(const std::string& s, const std::string& key) {
  if (s == "oscillator") return ScenarioKind::kOscillator;
  if (s == "damage_dynamic") return ScenarioKind::kDamageDynamic;
  if (s == "damage_quasistatic") return ScenarioKind::kDamageQuasistatic;
  if (s == "sweep") return ScenarioKind::kSweep;
  throw SchemaError(key, key + ": unknown kind '" + s + "'");
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      const std::string key = join(prefix, it.key());
      throw SchemaError(key, "unknown key '" + key + "'");
    }
  }
}

const json& object_at(const json& obj, const std::string& key, const std::string& name) {
  const json& v = obj.at(key);
  if (!v.is_object()) throw SchemaError(name, name + " must be an object");
  return v;
}

double number_value(const json& v, const std::string& name) {
  if (!v.is_number()) throw SchemaError(name, name + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(name, name + " must be finite");
  return x;
}

double number_or(const json& obj, const std::string& key, const std::string& name,
                 double fallback) {
  return obj.contains(key) ? number_value(obj.at(key), name) : fallback;
}

int integer_or(const json& obj, const std::string& key, const std::string& name,
               int fallback) {
  if (!obj.contains(key)) return fallback;
  const double x = number_value(obj.at(key), name);
  if (x != std::floor(x) || std::abs(x) > 1e9) {
    throw SchemaError(name, name + " must be an integer");
  }
  return static_cast<int>(x);
}

void require_positive(double v, const std::string& name) {
  if (!(v > 0.0)) throw SchemaError(name, name + " must be positive");
}

void parse_params(const json& doc, ScenarioConfig& cfg) {
  std::vector<std::string> required;
  std::vector<std::pair<std::string, double>> optional;
  if (cfg.kind == ScenarioKind::kOscillator) {
    required = {"m", "k", "mu"};
    optional = {{"q0", 1.0}, {"p0", 0.0}};
  } else {
    required = {"K_e", "gamma", "c", "beta"};
    optional = {{"rho", 1.0}};
    // A sweep sets c itself.
    if (cfg.kind == ScenarioKind::kSweep) {
      required = {"K_e", "gamma", "beta"};
      optional.push_back({"c", 0.0});
    }
  }
  if (!doc.contains("params")) {
    throw SchemaError(required.front(), "missing required key '" + required.front() + "'");
  }
  const json& p = object_at(doc, "params", "params");
  std::set<std::string> allowed(required.begin(), required.end());
  for (const auto& [k, v] : optional) allowed.insert(k);
  reject_unknown(p, allowed, "");
  for (const std::string& key : required) {
    if (!p.contains(key)) throw SchemaError(key, "missing required key '" + key + "'");
    cfg.params[key] = number_value(p.at(key), key);
  }
  for (const auto& [key, fallback] : optional) {
    if (p.contains(key)) {
      cfg.params[key] = number_value(p.at(key), key);
    } else if (!(cfg.kind == ScenarioKind::kSweep && key == "c")) {
      cfg.params[key] = fallback;
    }
  }
  for (const char* key : {"m", "k", "mu", "K_e", "gamma", "c", "rho"}) {
    auto it = cfg.params.find(key);
    if (it != cfg.params.end()) require_positive(it->second, key);
  }
  auto beta = cfg.params.find("beta");
  if (beta != cfg.params.end() && !(beta->second >= 0.0)) {
    throw SchemaError("beta", "beta must be nonnegative");
  }
}

void parse_loading(const json& doc, ScenarioConfig& cfg) {
  if (!doc.contains("loading")) throw SchemaError("loading", "missing required key 'loading'");
  const json& l = object_at(doc, "loading", "loading");
  reject_unknown(l, {"type", "amplitude", "rate"}, "loading");
  if (!l.contains("type")) throw SchemaError("loading.type", "missing required key 'loading.type'");
  if (!l.at("type").is_string()) {
    throw SchemaError("loading.type", "loading.type must be a string");
  }
  cfg.loading.type = l.at("type").get<std::string>();
  if (cfg.loading.type != "ramp" && cfg.loading.type != "hold" &&
      cfg.loading.type != "sine") {
    throw SchemaError("loading.type", "loading.type must be ramp, hold or sine");
  }
  cfg.loading.amplitude = number_or(l, "amplitude", "loading.amplitude", 0.0);
  cfg.loading.rate = number_or(l, "rate", "loading.rate", 0.0);
  if (cfg.loading.type == "ramp" && !l.contains("rate")) {
    throw SchemaError("loading.rate", "missing required key 'loading.rate'");
  }
  if (cfg.loading.type == "sine") require_positive(cfg.loading.rate, "loading.rate");
  if (cfg.loading.type == "ramp" && cfg.loading.amplitude < 0.0) {
    throw SchemaError("loading.amplitude", "loading.amplitude must be nonnegative for ramp");
  }
}

void parse_time(const json& doc, ScenarioConfig& cfg) {
  if (cfg.kind == ScenarioKind::kOscillator) {
    // Ten undamped periods.
    cfg.time.t_end =
        20.0 * std::numbers::pi * std::sqrt(cfg.params.at("m") / cfg.params.at("k"));
  }
  if (!doc.contains("time")) return;
  const json& t = object_at(doc, "time", "time");
  reject_unknown(t, {"t_end", "dt", "cfl_factor"}, "time");
  cfg.time.t_end = number_or(t, "t_end", "time.t_end", cfg.time.t_end);
  require_positive(cfg.time.t_end, "time.t_end");
  if (t.contains("dt")) {
    const json& dt = t.at("dt");
    if (dt.is_string()) {
      if (dt.get<std::string>() != "auto") {
        throw SchemaError("time.dt", "time.dt must be a number or \"auto\"");
      }
    } else {
      cfg.time.dt = number_value(dt, "time.dt");
      require_positive(*cfg.time.dt, "time.dt");
    }
  }
  cfg.time.cfl_factor = number_or(t, "cfl_factor", "time.cfl_factor", 0.5);
  if (!(cfg.time.cfl_factor > 0.0 && cfg.time.cfl_factor <= 1.0)) {
    throw SchemaError("time.cfl_factor", "time.cfl_factor must lie in (0, 1]");
  }
}

void parse_output(const json& doc, ScenarioConfig& cfg) {
  if (!doc.contains("output")) return;
  const json& o = object_at(doc, "output", "output");
  reject_unknown(o, {"dir", "snapshot_every"}, "output");
  if (o.contains("dir")) {
    if (!o.at("dir").is_string()) {
      throw SchemaError("output.dir", "output.dir must be a string");
    }
    cfg.output.dir = o.at("dir").get<std::string>();
  }
  cfg.output.snapshot_every =
      integer_or(o, "snapshot_every", "output.snapshot_every", 100);
  if (cfg.output.snapshot_every < 1) {
    throw SchemaError("output.snapshot_every", "output.snapshot_every must be positive");
  }
}

void parse_damage_extras(const json& doc, ScenarioConfig& cfg) {
  if (doc.contains("grid")) {
    const json& g = object_at(doc, "grid", "grid");
    reject_unknown(g, {"n_nodes", "length"}, "grid");
    cfg.grid.n_nodes = integer_or(g, "n_nodes", "grid.n_nodes", 101);
    cfg.grid.length = number_or(g, "length", "grid.length", 1.0);
    if (cfg.grid.n_nodes < 3) {
      throw SchemaError("grid.n_nodes", "grid.n_nodes must be at least 3");
    }
    require_positive(cfg.grid.length, "grid.length");
  }
  if (doc.contains("modulation")) {
    const json& m = doc.at("modulation");
    if (!m.is_string() || (m.get<std::string>() != "quadratic" &&
                           m.get<std::string>() != "cubic")) {
      throw SchemaError("modulation", "modulation must be quadratic or cubic");
    }
    cfg.modulation = m.get<std::string>();
  }
  if (doc.contains("notch")) {
    const json& n = object_at(doc, "notch", "notch");
    reject_unknown(n, {"center", "width", "depth"}, "notch");
    NotchConfig notch;
    notch.center = number_or(n, "center", "notch.center", notch.center);
    notch.width = number_or(n, "width", "notch.width", notch.width);
    notch.depth = number_or(n, "depth", "notch.depth", notch.depth);
    require_positive(notch.width, "notch.width");
    if (!(notch.depth >= 0.0 && notch.depth < 1.0)) {
      throw SchemaError("notch.depth", "notch.depth must lie in [0, 1)");
    }
    cfg.notch = notch;
  }
  parse_loading(doc, cfg);
}

void parse_sweep(const json& doc, ScenarioConfig& cfg) {
  if (!doc.contains("sweep")) throw SchemaError("sweep", "missing required key 'sweep'");
  const json& s = object_at(doc, "sweep", "sweep");
  reject_unknown(s, {"base", "c"}, "sweep");
  SweepConfig sweep;
  if (s.contains("base")) {
    if (!s.at("base").is_string()) {
      throw SchemaError("sweep.base", "sweep.base must be a string");
    }
    sweep.base = kind_from_string(s.at("base").get<std::string>(), "sweep.base");
    if (!is_damage_kind(sweep.base)) {
      throw SchemaError("sweep.base", "sweep.base must be a damage kind");
    }
  }
  if (!s.contains("c")) throw SchemaError("sweep.c", "missing required key 'sweep.c'");
  const json& values = s.at("c");
  if (!values.is_array() || values.empty()) {
    throw SchemaError("sweep.c", "sweep.c must be a non-empty array");
  }
  for (const json& v : values) {
    sweep.c_values.push_back(number_value(v, "sweep.c"));
    require_positive(sweep.c_values.back(), "sweep.c");
  }
  cfg.sweep = sweep;
}

// ---- output helpers -----------------------------------------------------

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed", path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory", dir.string());
  }
}

template <typename Json>
void write_json(const fs::path& path, const Json& doc) {
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

json number_or_null(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

void write_damage_ledger(const fs::path& path,
                         const std::vector<damage::LedgerRow>& rows) {
  std::ofstream out = open_output(path);
  out << "t,elastic,kinetic_u,kinetic_d,grad_d,local_d,dissipated,work,residual\n";
  for (const damage::LedgerRow& r : rows) {
    out << format_number(r.t) << ',' << format_number(r.elastic) << ','
        << format_number(r.kinetic_u) << ',' << format_number(r.kinetic_d) << ','
        << format_number(r.grad_d) << ',' << format_number(r.local_d) << ','
        << format_number(r.dissipated) << ',' << format_number(r.work) << ','
        << format_number(r.residual) << '\n';
  }
  finish(out, path);
}

void write_snapshots(const fs::path& dir, const std::vector<damage::Snapshot>& snaps,
                     const damage::Grid1D& grid) {
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "snap_%05zu.csv", s);
    const fs::path path = dir / name;
    std::ofstream out = open_output(path);
    out << "# t=" << format_number(snaps[s].t) << '\n';
    out << "x,u,p,d,y\n";
    const damage::DamageState& st = snaps[s].state;
    for (int i = 0; i < grid.n_nodes(); ++i) {
      out << format_number(grid.x(i)) << ',' << format_number(st.u(i)) << ','
          << format_number(st.p(i)) << ',' << format_number(st.d(i)) << ','
          << format_number(st.y(i)) << '\n';
    }
    finish(out, path);
  }
}

ojson energies_json(const damage::LedgerRow& r) {
  ojson e;
  e["elastic"] = r.elastic;
  e["kinetic_u"] = r.kinetic_u;
  e["kinetic_d"] = r.kinetic_d;
  e["grad_d"] = r.grad_d;
  e["local_d"] = r.local_d;
  e["total"] = r.hamiltonian();
  return e;
}

ojson violations_json(const damage::ConstraintViolations& v) {
  ojson j;
  j["damage_out_of_box"] = v.damage_out_of_box;
  j["damage_decrease"] = v.damage_decrease;
  j["negative_y"] = v.negative_y;
  j["negative_increment"] = v.negative_increment;
  return j;
}

// Result of one scenario, shared by run_scenario and run_sweep.
struct Outcome {
  RunReport report;
  Vector final_d;
  std::optional<double> front_speed;
  double max_residual = 0.0;
};

Outcome run_oscillator(const ScenarioConfig& cfg, const fs::path& dir) {
  const double m = cfg.param("m");
  const double k = cfg.param("k");
  const double mu = cfg.param("mu");
  const SplitSystem sys = CoulombOscillator(m, k, mu);
  const double period = 2.0 * std::numbers::pi * std::sqrt(m / k);
  const double dt = cfg.time.dt.value_or(period / 1000.0);
  const PhasePoint z0(Vector::Constant(1, cfg.param("q0")),
                      Vector::Constant(1, cfg.param("p0")));

  Outcome outcome;
  ojson summary;
  summary["kind"] = "oscillator";
  summary["dt"] = dt;
  Trajectory traj;
  try {
    traj = run(sys, z0, 0.0, cfg.time.t_end, dt);
  } catch (const NumericalBlowup& e) {
    summary["status"] = "blowup";
    summary["blowup_step"] = e.step();
    write_json(dir / "summary.json", summary);
    outcome.report = {kExitNumerical, e.what()};
    return outcome;
  }
  const std::vector<double> eta = accumulate_eta(sys, traj);

  const fs::path ledger_path = dir / "ledger.csv";
  std::ofstream out = open_output(ledger_path);
  out << "t,q,p,hamiltonian,dissipated,work,residual,eta\n";
  std::vector<double> qs;
  double eta_gap = kInfinity;
  double increments = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const EnergyLedger& l = traj.ledger[i];
    const double q = traj.states[i].x(0);
    qs.push_back(q);
    increments += traj.dissipation_increments[i];
    eta_gap = std::min(eta_gap, eta[i] - increments);
    out << format_number(traj.times[i]) << ',' << format_number(q) << ','
        << format_number(traj.states[i].y(0)) << ',' << format_number(l.hamiltonian)
        << ',' << format_number(l.dissipated) << ','
        << format_number(l.external_power_integral) << ',' << format_number(l.residual)
        << ',' << format_number(eta[i]) << '\n';
    outcome.max_residual = std::max(outcome.max_residual, std::abs(l.residual));
  }
  finish(out, ledger_path);

  const std::vector<Peak> peaks = positive_peaks(traj.times, qs);
  ojson table = ojson::array();
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    ojson row;
    row["period"] = i;
    row["t"] = peaks[i].t;
    row["amplitude"] = peaks[i].value;
    row["decrement"] = i == 0 ? json(nullptr) : json(peaks[i - 1].value - peaks[i].value);
    table.push_back(row);
  }
  const PhasePoint& zf = traj.states.back();
  ojson energies;
  energies["potential"] = 0.5 * k * zf.x(0) * zf.x(0);
  energies["kinetic"] = 0.5 * zf.y(0) * zf.y(0) / m;
  energies["total"] = traj.ledger.back().hamiltonian;
  summary["status"] = "ok";
  summary["steps"] = traj.size() - 1;
  summary["final_energies"] = energies;
  summary["final_q"] = zf.x(0);
  summary["stick_bound"] = mu / k;
  summary["max_residual"] = outcome.max_residual;
  summary["total_dissipated"] = traj.ledger.back().dissipated;
  summary["min_eta_minus_dissipation"] = eta_gap;
  summary["decrement_closed_form"] = 4.0 * mu / k;
  summary["amplitude_per_period"] = table;
  summary["front_speed"] = nullptr;
  summary["speed_estimate"] = nullptr;
  write_json(dir / "summary.json", summary);
  outcome.report = {kExitOk, "ok"};
  return outcome;
}

Outcome run_damage_dynamic(const ScenarioConfig& cfg, const fs::path& dir) {
  const damage::DamageScenario sc = to_damage_scenario(cfg);
  const damage::DynamicResult r = damage::run_dynamic(sc);
  const damage::Diagnostics& diag = r.diagnostics;
  write_damage_ledger(dir / "ledger.csv", r.ledger);
  write_snapshots(dir, r.snapshots, sc.grid);

  Outcome outcome;
  outcome.final_d = r.final_state.d;
  outcome.front_speed = diag.front_speed;
  outcome.max_residual = diag.max_residual;

  ojson summary;
  summary["kind"] = "damage_dynamic";
  summary["status"] = diag.blowup ? "blowup" : "ok";
  if (diag.blowup) summary["blowup_step"] = diag.blowup_step;
  summary["dt"] = diag.dt;
  summary["steps"] = diag.steps;
  summary["final_energies"] = energies_json(r.ledger.back());
  summary["max_residual"] = diag.max_residual;
  summary["total_dissipated"] = diag.total_dissipated;
  summary["front_speed"] = number_or_null(diag.front_speed);
  summary["speed_estimate"] = diag.speed_estimate;
  summary["speed_ratio"] = diag.front_speed
                               ? json(*diag.front_speed / diag.speed_estimate)
                               : json(nullptr);
  summary["elastic_speed"] = diag.elastic_speed;
  summary["band_width"] = damage::band_width(r.final_state.d, sc.grid);
  summary["constraint_violations"] = violations_json(diag.violations);
  write_json(dir / "summary.json", summary);
  outcome.report = diag.blowup
                       ? RunReport{kExitNumerical, "numerical blow-up at step " +
                                                       std::to_string(diag.blowup_step)}
                       : RunReport{kExitOk, "ok"};
  return outcome;
}

Outcome run_damage_quasistatic(const ScenarioConfig& cfg, const fs::path& dir) {
  const damage::DamageScenario sc = to_damage_scenario(cfg);
  const damage::QuasistaticResult r = damage::run_quasistatic_at(sc, true);
  const int n = sc.grid.n_nodes();
  write_damage_ledger(dir / "ledger.csv", r.ledger);

  const QuasistaticTrajectory& traj = r.trajectory;
  std::vector<damage::Snapshot> all;
  std::vector<damage::Snapshot> kept;
  const std::size_t every = static_cast<std::size_t>(sc.snapshot_every);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    damage::DamageState s = damage::DamageState::Zero(sc.grid);
    s.u = traj.states[k].head(n);
    s.d = traj.states[k].tail(n);
    all.push_back({traj.times[k], s});
    if (k % every == 0 || k + 1 == traj.states.size()) kept.push_back(all.back());
  }
  write_snapshots(dir, kept, sc.grid);

  Outcome outcome;
  outcome.final_d = all.back().state.d;
  outcome.max_residual = r.max_residual;

  ojson summary;
  summary["kind"] = "damage_quasistatic";
  summary["status"] = "ok";
  summary["steps"] = traj.states.size() - 1;
  summary["final_energies"] = energies_json(r.ledger.back());
  summary["max_residual"] = r.max_residual;
  summary["total_dissipated"] = traj.diss_cumulative.back();
  summary["max_stability_violation"] = r.max_stability_violation;
  summary["convergence_warnings"] = traj.convergence_warnings;
  // Quasistatic time is a load parameter, so no propagation speed exists.
  summary["front_speed"] = nullptr;
  summary["speed_estimate"] = sc.params.damage_speed();
  summary["band_width"] = damage::band_width(outcome.final_d, sc.grid);
  summary["constraint_violations"] = violations_json(damage::check_constraints(all));
  write_json(dir / "summary.json", summary);
  outcome.report = {kExitOk, "ok"};
  return outcome;
}

Outcome dispatch(const ScenarioConfig& cfg, const fs::path& dir) {
  ensure_dir(dir);
  switch (cfg.kind) {
    case ScenarioKind::kOscillator:
      return run_oscillator(cfg, dir);
    case ScenarioKind::kDamageDynamic:
      return run_damage_dynamic(cfg, dir);
    case ScenarioKind::kDamageQuasistatic:
      return run_damage_quasistatic(cfg, dir);
    case ScenarioKind::kSweep:
      break;
  }
  throw DomainError("run_scenario: sweep configs go through run_sweep");
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kOscillator:
      return "oscillator";
    case ScenarioKind::kDamageDynamic:
      return "damage_dynamic";
    case ScenarioKind::kDamageQuasistatic:
      return "damage_quasistatic";
    case ScenarioKind::kSweep:
      return "sweep";
  }
  return "unknown";
}

double ScenarioConfig::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw SchemaError(key, "missing required key '" + key + "'");
  return it->second;
}

ScenarioConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  if (!doc.is_object()) throw SchemaError("", "config must be a JSON object");
  reject_unknown(doc,
                 {"kind", "params", "modulation", "grid", "loading", "time", "output",
                  "notch", "sweep"},
                 "");
  if (!doc.contains("kind")) throw SchemaError("kind", "missing required key 'kind'");
  if (!doc.at("kind").is_string()) throw SchemaError("kind", "kind must be a string");

  ScenarioConfig cfg;
  cfg.kind = kind_from_string(doc.at("kind").get<std::string>(), "kind");
  parse_params(doc, cfg);
  if (cfg.kind == ScenarioKind::kOscillator) {
    for (const char* key : {"grid", "loading", "modulation", "notch", "sweep"}) {
      if (doc.contains(key)) {
        throw SchemaError(key, std::string(key) + " is not used by oscillator");
      }
    }
  } else {
    parse_damage_extras(doc, cfg);
    if (cfg.kind == ScenarioKind::kSweep) {
      parse_sweep(doc, cfg);
    } else if (doc.contains("sweep")) {
      throw SchemaError("sweep", "sweep is only valid with kind sweep");
    }
  }
  parse_time(doc, cfg);
  parse_output(doc, cfg);
  return cfg;
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  ojson doc;
  doc["kind"] = to_string(cfg.kind);
  ojson params = ojson::object();
  for (const auto& [k, v] : cfg.params) params[k] = v;
  doc["params"] = params;
  if (cfg.kind != ScenarioKind::kOscillator) {
    doc["modulation"] = cfg.modulation;
    doc["grid"] = {{"n_nodes", cfg.grid.n_nodes}, {"length", cfg.grid.length}};
    doc["loading"] = {{"type", cfg.loading.type},
                      {"amplitude", cfg.loading.amplitude},
                      {"rate", cfg.loading.rate}};
    if (cfg.notch) {
      doc["notch"] = {{"center", cfg.notch->center},
                      {"width", cfg.notch->width},
                      {"depth", cfg.notch->depth}};
    }
  }
  ojson time;
  time["t_end"] = cfg.time.t_end;
  time["dt"] = cfg.time.dt ? ojson(*cfg.time.dt) : ojson("auto");
  time["cfl_factor"] = cfg.time.cfl_factor;
  doc["time"] = time;
  ojson output;
  if (cfg.output.dir) output["dir"] = *cfg.output.dir;
  output["snapshot_every"] = cfg.output.snapshot_every;
  doc["output"] = output;
  if (cfg.sweep) {
    doc["sweep"] = {{"base", to_string(cfg.sweep->base)}, {"c", cfg.sweep->c_values}};
  }
  return doc.dump(2) + "\n";
}

damage::Loading make_loading(const LoadingConfig& cfg) {
  if (cfg.type == "ramp") return damage::Loading::Ramp(cfg.rate, cfg.amplitude);
  if (cfg.type == "hold") return damage::Loading::Hold(cfg.amplitude);
  if (cfg.type == "sine") return damage::Loading::Sine(cfg.amplitude, cfg.rate);
  throw SchemaError("loading.type", "loading.type must be ramp, hold or sine");
}

damage::DamageScenario to_damage_scenario(const ScenarioConfig& cfg) {
  if (!is_damage_kind(cfg.kind)) {
    throw SchemaError("kind", "kind must be damage_dynamic or damage_quasistatic");
  }
  damage::DamageScenario sc;
  sc.grid = damage::Grid1D(cfg.grid.n_nodes, cfg.grid.length);
  sc.params.K_e = cfg.param("K_e");
  sc.params.gamma = cfg.param("gamma");
  sc.params.c = cfg.param("c");
  sc.params.beta = cfg.param("beta");
  sc.params.rho = cfg.param("rho");
  sc.modulation = damage::modulation_from_string(cfg.modulation);
  sc.loading = make_loading(cfg.loading);
  sc.t_end = cfg.time.t_end;
  sc.dt = cfg.time.dt;
  sc.cfl_factor = cfg.time.cfl_factor;
  sc.snapshot_every = cfg.output.snapshot_every;
  if (cfg.notch && cfg.notch->depth > 0.0) {
    Vector d(sc.grid.n_nodes());
    for (int i = 0; i < sc.grid.n_nodes(); ++i) {
      const double r = std::abs(sc.grid.x(i) - cfg.notch->center) / cfg.notch->width;
      d(i) = cfg.notch->depth * std::max(0.0, 1.0 - r);
    }
    sc.initial_damage = d;
  }
  return sc;
}

fs::path resolve_output_dir(const ScenarioConfig& cfg,
                            const std::optional<std::string>& override_dir) {
  if (override_dir) return *override_dir;
  if (cfg.output.dir) return *cfg.output.dir;
  if (const char* env = std::getenv("DHAMSIM_OUT"); env && *env) return env;
  return "out";
}

RunReport run_scenario(const ScenarioConfig& cfg, const fs::path& dir) {
  return dispatch(cfg, dir).report;
}

RunReport run_sweep(const ScenarioConfig& cfg, const fs::path& dir) {
  if (cfg.kind != ScenarioKind::kSweep || !cfg.sweep) {
    throw SchemaError("kind", "run_sweep needs kind sweep");
  }
  ensure_dir(dir);
  const fs::path csv_path = dir / "sweep.csv";
  std::ofstream csv = open_output(csv_path);
  csv << "c,band_width,front_speed,max_residual\n";
  RunReport report;
  std::vector<double> widths;
  for (double c : cfg.sweep->c_values) {
    ScenarioConfig sub = cfg;
    sub.kind = cfg.sweep->base;
    sub.sweep.reset();
    sub.params["c"] = c;
    char name[64];
    std::snprintf(name, sizeof(name), "c_%.6g", c);
    const Outcome o = dispatch(sub, dir / name);
    if (o.report.exit_code != kExitOk) report = o.report;
    const damage::Grid1D grid(cfg.grid.n_nodes, cfg.grid.length);
    widths.push_back(damage::band_width(o.final_d, grid));
    csv << format_number(c) << ',' << format_number(widths.back()) << ','
        << (o.front_speed ? format_number(*o.front_speed) : std::string()) << ','
        << format_number(o.max_residual) << '\n';
  }
  finish(csv, csv_path);

  // Trend in the order the c values were given, reported only.
  std::vector<std::size_t> order(widths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cfg.sweep->c_values[a] > cfg.sweep->c_values[b];
  });
  bool nonincreasing = true;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (widths[order[i]] > widths[order[i - 1]] + 1e-12) nonincreasing = false;
  }
  ojson summary;
  summary["kind"] = "sweep";
  summary["base"] = to_string(cfg.sweep->base);
  summary["c"] = cfg.sweep->c_values;
  summary["band_width"] = widths;
  summary["width_nonincreasing_as_c_decreases"] = nonincreasing;
  write_json(dir / "sweep.json", summary);
  if (report.exit_code == kExitOk) {
    report.message = nonincreasing ? "band width nonincreasing as c decreases"
                                   : "band width not monotone in c";
  }
  return report;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Peak> positive_peaks(const std::vector<double>& t,
                                 const std::vector<double>& q) {
  if (t.size() != q.size()) {
    throw InvalidDimension("positive_peaks", t.size(), q.size());
  }
  std::vector<Peak> peaks;
  const std::size_t n = q.size();
  if (n >= 2 && q[0] > 0.0 && q[1] <= q[0]) peaks.push_back({t[0], q[0]});
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(q[i] > q[i - 1] && q[i] >= q[i + 1] && q[i] > 0.0)) continue;
    const double curvature = q[i - 1] - 2.0 * q[i] + q[i + 1];
    double offset = 0.0;
    double value = q[i];
    if (curvature < 0.0) {
      offset = std::clamp(0.5 * (q[i - 1] - q[i + 1]) / curvature, -1.0, 1.0);
      value = q[i] - 0.25 * (q[i - 1] - q[i + 1]) * offset;
    }
    const double h = offset >= 0.0 ? t[i + 1] - t[i] : t[i] - t[i - 1];
    peaks.push_back({t[i] + offset * h, value});
  }
  return peaks;
}

}  // namespace dhamsim
