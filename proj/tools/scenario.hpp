#pragma once
// Scenario files and reports for the command line runner.
//
// Both are line-delimited `key = value` text. Report lines come in a fixed
// order; lines starting with `timing.` carry wall-clock times and are the
// only part outside the determinism guarantee.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lg::cli {

struct Scenario {
  std::string construction;
  int n = 2;
  int k = 1;
  int order = 64;
  double R = 8.0;
  std::vector<std::string> checks;
  std::size_t samples = 200;
  std::uint64_t seed = 42;
  std::map<std::string, double> tol;  // per-check overrides
  std::string inject;                 // negative controls: nontame_f, corrupt_mul
};

struct ConstructionInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> checks;
};

const std::vector<ConstructionInfo>& constructions();
const std::vector<std::string>& check_names();
double default_tolerance(const std::string& check);

/// Parses `key = value` lines; `#` starts a comment. Throws a scenario error
/// naming the line on unknown keys or bad values.
Scenario parse_scenario(std::istream& in);
/// Construction known, checks applicable, parameters in range.
void validate(const Scenario& s);

struct CheckEntry {
  std::string name;
  bool passed = false;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::size_t samples = 0;
  std::string witness;
  std::vector<std::string> notes;
  double seconds = 0.0;
};

struct ErrorEntry {
  std::string kind;
  std::string message;
  std::string witness;
};

struct ScenarioReport {
  Scenario scenario;
  std::string version;
  std::vector<CheckEntry> checks;
  std::optional<ErrorEntry> error;
  double seconds = 0.0;

  bool passed() const;
};

/// Builds the construction and runs the checks in scenario order. Library
/// errors become the report's error entry instead of propagating.
ScenarioReport run(const Scenario& s);

/// Deterministic lines only.
std::string payload(const ScenarioReport& r);
/// Payload followed by the timing lines.
std::string render(const ScenarioReport& r);
/// One line per check for terminals.
std::string summary(const ScenarioReport& r);

}  // namespace lg::cli
