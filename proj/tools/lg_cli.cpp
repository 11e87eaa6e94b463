// Scenario runner: lg_cli run <scenario-file> [--seed N] [--samples N]
// [--tol NAME=VALUE]... [--report PATH], or lg_cli --list-constructions.
// LG_THREADS sets the worker count; reports do not depend on it.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lg/error.hpp"
#include "scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lie groupoid scenario runner"};
  app.require_subcommand(0, 1);

  bool list = false;
  app.add_flag("--list-constructions", list, "List constructions and their applicable checks");

  auto* run = app.add_subcommand("run", "Run a scenario file");
  std::string file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::vector<std::string> tols;
  std::string report_path;
  run->add_option("scenario", file, "Scenario file (key = value lines)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--samples", samples, "Override the sample count");
  run->add_option("--tol", tols, "Tolerance override NAME=VALUE (repeatable)");
  run->add_option("--report", report_path, "Write the machine-readable report here ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : lg::cli::constructions()) {
      std::cout << c.name << "  " << c.summary << "\n    checks:";
      for (const auto& k : c.checks) std::cout << " " << k;
      std::cout << "\n";
    }
    return 0;
  }
  if (!run->parsed()) {
    std::cerr << app.help();
    return 2;
  }

  lg::cli::Scenario s;
  try {
    std::ifstream in(file);
    s = lg::cli::parse_scenario(in);
    if (seed) s.seed = *seed;
    if (samples) s.samples = *samples;
    for (const auto& t : tols) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw lg::Error(lg::ErrorKind::Scenario, "--tol expects NAME=VALUE, got " + t);
      s.tol[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  const auto report = lg::cli::run(s);
  std::cout << lg::cli::summary(report);
  if (report_path == "-") {
    std::cout << lg::cli::render(report);
  } else if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << lg::cli::render(report);
    if (!out) {
      std::cerr << "cannot write report to " << report_path << "\n";
      return 2;
    }
  }
  return report.passed() ? 0 : 1;
}
