// vsnet: run virtualization + estimation experiments from a scenario file.
//
//   vsnet run --scenario s.txt --out results.csv --format csv [--seed N] [--parallel K] [--verbose-events]
//   vsnet validate --scenario s.txt
//
// Exit codes: 0 ok, 1 validation/usage error, 2 I/O error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include <vsnet/harness.hpp>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_io = 2;

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swarm virtualization and distributed estimation experiments"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, format = "csv";
  std::optional<std::uint64_t> seed;
  unsigned parallel = 1;
  bool verbose_events = false;

  auto* run = app.add_subcommand("run", "Run a scenario and write per-replication results");
  run->add_option("--scenario", scenario_path, "Scenario file")->required();
  run->add_option("--out", out_path, "Output path")->required();
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--verbose-events", verbose_events, "Write per-contact gossip events to <out>.events.jsonl");

  auto* val = app.add_subcommand("validate", "Check a scenario file");
  val->add_option("--scenario", scenario_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_invalid;
  }

  try {
    const vsnet::Scenario sc = vsnet::load_scenario(scenario_path);
    if (*val) {
      std::cout << "ok: " << sc.id << '\n';
      return exit_ok;
    }
    vsnet::RunOptions opt;
    opt.seed = seed;
    opt.parallel = parallel;
    std::ofstream events;
    if (verbose_events) {
      events.open(out_path + ".events.jsonl", std::ios::trunc);
      if (!events)
        throw vsnet::io_error("cannot write '" + out_path + ".events.jsonl'");
      opt.events = &events;
    }
    const auto records = vsnet::run_experiment(sc, opt);
    vsnet::emit_results(records, format, out_path);
    if (verbose_events && !events.flush())
      throw vsnet::io_error("event log write failed");
  } catch (const vsnet::validation_error& e) {
    std::cerr << scenario_path << ": " << e.what() << '\n';
    return exit_invalid;
  } catch (const vsnet::io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_invalid;
  }
  return exit_ok;
}
