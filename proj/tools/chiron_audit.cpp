// chiron-audit: runs the adversarial scenario suite against the build.
//
// `run-all` executes every attack scenario on a fresh platform and, in this
// (test-instrumented) build, every security mutation. Exit 0 only when all
// scenarios HELD and every mutation was detected.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chiron/harness.hpp"

int main(int argc, char** argv) {
  using namespace chiron::harness;

  CLI::App cli{"chiron-audit: adversarial scenario suite"};
  bool as_json = false;
  auto* run_all_cmd = cli.add_subcommand("run-all", "run every scenario and mutation");
  run_all_cmd->add_flag("--json", as_json, "emit a machine-readable report");
  cli.require_subcommand(1);
  CLI11_PARSE(cli, argc, argv);

  auto scenario_results = run_all();
  auto mutation_results = run_mutations();

  bool ok = true;
  for (const auto& r : scenario_results) ok = ok && r.held;
  for (const auto& m : mutation_results) ok = ok && m.detected;

  if (as_json) {
    std::cout << report_json(scenario_results, mutation_results).dump(2) << "\n";
    return ok ? 0 : 1;
  }

  for (const auto& r : scenario_results) {
    std::cout << (r.held ? "HELD     " : "VIOLATED ") << r.adversary << "/" << r.name;
    if (!r.held) std::cout << "  [" << r.evidence << "]";
    std::cout << "\n";
  }
  for (const auto& m : mutation_results) {
    std::cout << (m.detected ? "DETECTED " : "MISSED   ") << "mutation " << m.name;
    if (m.detected) {
      std::cout << "  (caught by";
      for (const auto& s : m.caught_by) std::cout << ' ' << s;
      std::cout << ")";
    }
    std::cout << "\n";
  }
  std::cout << (ok ? "audit: all held, all mutations detected\n" : "audit: FAILURES above\n");
  return ok ? 0 : 1;
}
