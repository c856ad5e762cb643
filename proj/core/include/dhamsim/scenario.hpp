#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dhamsim/damage1d.hpp"

namespace dhamsim {

enum class ScenarioKind { kOscillator, kDamageDynamic, kDamageQuasistatic, kSweep };

std::string to_string(ScenarioKind kind);

struct GridConfig {
  int n_nodes = 101;
  double length = 1.0;
  bool operator==(const GridConfig&) const = default;
};

/// ramp: u(t) = rate t, capped at amplitude when amplitude > 0.
/// hold: u(t) = amplitude.
/// sine: u(t) = amplitude sin(rate t).
struct LoadingConfig {
  std::string type = "hold";
  double amplitude = 0.0;
  double rate = 0.0;
  bool operator==(const LoadingConfig&) const = default;
};

struct TimeConfig {
  double t_end = 1.0;
  /// Empty means "auto".
  std::optional<double> dt;
  double cfl_factor = 0.5;
  bool operator==(const TimeConfig&) const = default;
};

struct OutputConfig {
  /// Empty means: DHAMSIM_OUT if set, else "out".
  std::optional<std::string> dir;
  int snapshot_every = 100;
  bool operator==(const OutputConfig&) const = default;
};

/// Triangular damage seed of peak `depth` and half-width `width` at `center`.
struct NotchConfig {
  double center = 0.5;
  double width = 0.05;
  double depth = 0.0;
  bool operator==(const NotchConfig&) const = default;
};

struct SweepConfig {
  ScenarioKind base = ScenarioKind::kDamageDynamic;
  std::vector<double> c_values;
  bool operator==(const SweepConfig&) const = default;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kOscillator;
  std::map<std::string, double> params;
  std::string modulation = "quadratic";
  GridConfig grid;
  LoadingConfig loading;
  TimeConfig time;
  OutputConfig output;
  std::optional<NotchConfig> notch;
  std::optional<SweepConfig> sweep;

  double param(const std::string& key) const;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Parses and validates a JSON document. Throws ParseError (with byte
/// offset) on malformed JSON and SchemaError naming the key otherwise.
ScenarioConfig parse_config(std::string_view text);

/// Reads and parses a file; IoError if it cannot be read.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical JSON with every default spelled out.
std::string serialize_config(const ScenarioConfig& cfg);

damage::Loading make_loading(const LoadingConfig& cfg);
damage::DamageScenario to_damage_scenario(const ScenarioConfig& cfg);

/// Output directory resolution: explicit override, then the config, then
/// DHAMSIM_OUT, then "out".
std::filesystem::path resolve_output_dir(const ScenarioConfig& cfg,
                                         const std::optional<std::string>& override_dir);

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

struct RunReport {
  int exit_code = kExitOk;
  std::string message;
};

/// Runs a single (non-sweep) scenario and writes ledger.csv, snap_*.csv and
/// summary.json into `dir`. A numerical blow-up keeps the partial outputs
/// and reports kExitNumerical. Throws IoError on filesystem failures.
RunReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& dir);

/// One subdirectory per c value plus sweep.csv (c, band width at d = 0.5,
/// front speed, max residual).
RunReport run_sweep(const ScenarioConfig& cfg, const std::filesystem::path& dir);

/// Fixed CSV number format: 17 significant digits.
std::string format_number(double v);

/// Successive positive maxima of a sampled signal, located by parabolic
/// interpolation through the three samples around each discrete peak.
struct Peak {
  double t = 0.0;
  double value = 0.0;
};
std::vector<Peak> positive_peaks(const std::vector<double>& t,
                                 const std::vector<double>& q);

}  // namespace dhamsim
