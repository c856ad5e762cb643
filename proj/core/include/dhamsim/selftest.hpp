#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dhamsim {

struct SelftestRow {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SelftestOptions {
  std::uint64_t seed = 12345;
  /// Test mode: the named check runs with a negative tolerance and must fail.
  std::optional<std::string> inject_failure;
};

/// Bundled invariant suite: symplectic identities, prox properties, the
/// Coulomb stick-slip oracle and the first-order energy balance test.
std::vector<SelftestRow> run_selftest(const SelftestOptions& opts = {});

/// Names accepted by SelftestOptions::inject_failure.
std::vector<std::string> selftest_names();

/// Deterministic plain-text table, one line per check plus a summary line.
std::string format_selftest(const std::vector<SelftestRow>& rows);

}  // namespace dhamsim
