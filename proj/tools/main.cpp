#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dhamsim/scenario.hpp"
#include "dhamsim/selftest.hpp"

namespace {

using dhamsim::ScenarioConfig;

int fail(int code, const std::string& message) {
  std::cerr << "dhamsim: " << message << '\n';
  return code;
}

// Maps library exceptions onto the documented exit codes.
template <typename Body>
int guarded(Body&& body) {
  try {
    return body();
  } catch (const dhamsim::ParseError& e) {
    return fail(dhamsim::kExitConfig, std::string("parse error at byte ") +
                                          std::to_string(e.position()) + ": " + e.what());
  } catch (const dhamsim::SchemaError& e) {
    return fail(dhamsim::kExitConfig, std::string("config error: ") + e.what());
  } catch (const dhamsim::IoError& e) {
    return fail(dhamsim::kExitIo, e.what());
  } catch (const dhamsim::NumericalBlowup& e) {
    return fail(dhamsim::kExitNumerical, e.what());
  } catch (const dhamsim::DomainError& e) {
    return fail(dhamsim::kExitConfig, e.what());
  } catch (const std::exception& e) {
    return fail(dhamsim::kExitNumerical, e.what());
  }
}

ScenarioConfig load(const std::string& path, const std::optional<double>& dt) {
  ScenarioConfig cfg = dhamsim::load_config(path);
  if (dt) {
    if (!(*dt > 0.0)) throw dhamsim::SchemaError("dt", "--dt must be positive");
    cfg.time.dt = *dt;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dhamsim: dissipative Hamiltonian and damage simulations"};
  app.require_subcommand(1);

  std::string out_arg;
  double dt_arg = 0.0;
  std::uint64_t seed = 12345;

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario config");
  run_cmd->add_option("config", config_path, "JSON config")->required();
  run_cmd->add_option("--out", out_arg, "Output directory");
  run_cmd->add_option("--dt", dt_arg, "Override the time step");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a sweep config");
  sweep_cmd->add_option("config", config_path, "JSON config")->required();
  sweep_cmd->add_option("--out", out_arg, "Output directory");
  sweep_cmd->add_option("--dt", dt_arg, "Override the time step");

  std::string inject;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the bundled invariant suite");
  selftest_cmd->add_option("--seed", seed, "Seed for the randomized checks");
  selftest_cmd->add_option("--inject-failure", inject,
                           "Test mode: force the named check to fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dhamsim::kExitConfig;
  }
  std::optional<std::string> out_dir;
  if (!out_arg.empty()) out_dir = out_arg;
  std::optional<double> dt;
  if (run_cmd->count("--dt") + sweep_cmd->count("--dt") > 0) dt = dt_arg;

  if (*run_cmd) {
    return guarded([&] {
      const ScenarioConfig cfg = load(config_path, dt);
      if (cfg.kind == dhamsim::ScenarioKind::kSweep) {
        throw dhamsim::SchemaError("kind", "use the sweep subcommand for sweep configs");
      }
      const auto dir = dhamsim::resolve_output_dir(cfg, out_dir);
      const dhamsim::RunReport report = dhamsim::run_scenario(cfg, dir);
      if (report.exit_code != dhamsim::kExitOk) return fail(report.exit_code, report.message);
      std::cout << "wrote " << dir.string() << '\n';
      return 0;
    });
  }
  if (*sweep_cmd) {
    return guarded([&] {
      const ScenarioConfig cfg = load(config_path, dt);
      if (cfg.kind != dhamsim::ScenarioKind::kSweep) {
        throw dhamsim::SchemaError("kind", "sweep needs kind sweep");
      }
      const auto dir = dhamsim::resolve_output_dir(cfg, out_dir);
      const dhamsim::RunReport report = dhamsim::run_sweep(cfg, dir);
      if (report.exit_code != dhamsim::kExitOk) return fail(report.exit_code, report.message);
      std::cout << "wrote " << dir.string() << " (" << report.message << ")\n";
      return 0;
    });
  }
  return guarded([&] {
    dhamsim::SelftestOptions opts;
    opts.seed = seed;
    if (!inject.empty()) opts.inject_failure = inject;
    const auto rows = dhamsim::run_selftest(opts);
    std::cout << dhamsim::format_selftest(rows);
    for (const auto& r : rows) {
      if (!r.passed) return 1;
    }
    return 0;
  });
}
