#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hatsim/runner.hpp"
#include "hatsim/scenario.hpp"

namespace {

void add_common(CLI::App* cmd, hatsim::RunArgs& args, std::string& seed_str) {
  cmd->add_option("--scenario", args.scenario_path, "Scenario JSON file")
      ->required();
  cmd->add_option("--seed", seed_str, "Root seed override");
  cmd->add_option("--framework", args.framework_override,
                  "Framework override: hat, ushape, fixed-chunk, hat-no-pd");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_flag("--event-log", args.emit_event_log,
                "Write the full event trace (events.csv)");
  cmd->add_option("--jobs", args.jobs, "Concurrent sweep points");
}

std::vector<hatsim::SweepSpec> parse_sweeps(const std::vector<std::string>& raw) {
  std::vector<hatsim::SweepSpec> sweeps;
  for (const auto& spec : raw) {
    std::size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--sweep", "expected key=v1,v2,...");
    }
    hatsim::SweepSpec s;
    s.key = spec.substr(0, eq);
    std::stringstream values(spec.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, ',')) s.values.push_back(v);
    if (s.values.empty()) {
      throw CLI::ValidationError("--sweep", "value list must be nonempty");
    }
    sweeps.push_back(std::move(s));
  }
  return sweeps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hatsim: deterministic device-cloud collaborative inference simulator"};
  app.require_subcommand(1);

  hatsim::RunArgs run_args;
  std::string run_seed;
  CLI::App* run_cmd = app.add_subcommand("run", "Execute one scenario");
  add_common(run_cmd, run_args, run_seed);

  hatsim::RunArgs sweep_args;
  std::string sweep_seed;
  std::vector<std::string> sweep_raw;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Execute a parameter sweep");
  add_common(sweep_cmd, sweep_args, sweep_seed);
  sweep_cmd->add_option("--sweep", sweep_raw, "key=v1,v2 (repeatable, cross product)")
      ->required();

  std::string validate_path;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Parse and check a scenario");
  validate_cmd->add_option("--scenario", validate_path, "Scenario JSON file")
      ->required();

  CLI::App* defaults_cmd =
      app.add_subcommand("dump-defaults", "Print the fully-defaulted scenario");

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults_cmd->parsed()) {
      std::cout << hatsim::serialize_scenario(hatsim::Scenario{});
      return 0;
    }
    if (validate_cmd->parsed()) {
      std::ifstream in(validate_path);
      if (!in) {
        std::fprintf(stderr, "error: cannot open scenario '%s'\n",
                     validate_path.c_str());
        return 1;
      }
      std::stringstream buffer;
      buffer << in.rdbuf();
      hatsim::parse_scenario(buffer.str());
      std::printf("ok: %s\n", validate_path.c_str());
      return 0;
    }
    hatsim::RunArgs& args = run_cmd->parsed() ? run_args : sweep_args;
    const std::string& seed_str = run_cmd->parsed() ? run_seed : sweep_seed;
    if (!seed_str.empty()) args.seed_override = std::stoull(seed_str);
    if (sweep_cmd->parsed()) args.sweeps = parse_sweeps(sweep_raw);
    return hatsim::execute(args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
