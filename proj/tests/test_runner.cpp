#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hatsim/runner.hpp"

using namespace hatsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_scenario(const std::string& name) {
  Scenario sc;
  sc.seed = 5;
  sc.workload.rate_per_s = 0.4;
  sc.workload.horizon_s = 20.0;
  sc.workload.max_new_tokens = 16;
  fs::path dir = fs::temp_directory_path() / "hatsim_runner_tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  out << serialize_scenario(sc);
  return p;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("apply_override writes dotted paths") {
  Scenario sc;
  Scenario changed = apply_override(sc, "workload.rate_per_s", "4.5");
  CHECK(changed.workload.rate_per_s == 4.5);
  Scenario fw = apply_override(sc, "framework", "ushape");
  CHECK(fw.framework == Framework::UShape);
  CHECK_THROWS_AS(apply_override(sc, "workload.nonsense", "1"), ConfigError);
}

TEST_CASE("single run writes both csv files deterministically") {
  fs::path scenario = write_scenario("single.json");
  fs::path out1 = scenario.parent_path() / "out_a";
  fs::path out2 = scenario.parent_path() / "out_b";
  fs::remove_all(out1);
  fs::remove_all(out2);

  RunArgs args;
  args.scenario_path = scenario.string();
  args.out_dir = out1.string();
  REQUIRE(execute(args) == 0);
  args.out_dir = out2.string();
  REQUIRE(execute(args) == 0);

  CHECK(fs::exists(out1 / "per_request.csv"));
  CHECK(fs::exists(out1 / "summary.csv"));
  CHECK(fs::exists(out1 / "effective_config.json"));
  CHECK(count_lines(slurp(out1 / "summary.csv")) == 2);  // header + one row

  CHECK(slurp(out1 / "per_request.csv") == slurp(out2 / "per_request.csv"));
  CHECK(slurp(out1 / "summary.csv") == slurp(out2 / "summary.csv"));
}

TEST_CASE("sweep produces the cartesian product") {
  fs::path scenario = write_scenario("sweep.json");
  fs::path out = scenario.parent_path() / "out_sweep";
  fs::remove_all(out);

  RunArgs args;
  args.scenario_path = scenario.string();
  args.out_dir = out.string();
  args.sweeps = {{"workload.rate_per_s", {"0.2", "0.4", "0.6"}},
                 {"framework", {"hat", "ushape"}}};
  REQUIRE(execute(args) == 0);
  CHECK(count_lines(slurp(out / "summary.csv")) == 7);  // header + 6 rows
}

TEST_CASE("sweep output is independent of parallelism") {
  fs::path scenario = write_scenario("jobs.json");
  fs::path seq_dir = scenario.parent_path() / "out_seq";
  fs::path par_dir = scenario.parent_path() / "out_par";
  fs::remove_all(seq_dir);
  fs::remove_all(par_dir);

  RunArgs args;
  args.scenario_path = scenario.string();
  args.sweeps = {{"framework", {"hat", "ushape", "hat-no-pd", "fixed-chunk"}}};
  args.out_dir = seq_dir.string();
  args.jobs = 1;
  REQUIRE(execute(args) == 0);
  args.out_dir = par_dir.string();
  args.jobs = 4;
  REQUIRE(execute(args) == 0);

  CHECK(slurp(seq_dir / "summary.csv") == slurp(par_dir / "summary.csv"));
  for (const char* fw : {"framework=hat", "framework=ushape"}) {
    CHECK(slurp(seq_dir / fw / "per_request.csv") ==
          slurp(par_dir / fw / "per_request.csv"));
  }
}

TEST_CASE("summary rows are reproducible in isolation") {
  fs::path scenario = write_scenario("repro.json");
  fs::path sweep_dir = scenario.parent_path() / "out_repro_sweep";
  fs::path solo_dir = scenario.parent_path() / "out_repro_solo";
  fs::remove_all(sweep_dir);
  fs::remove_all(solo_dir);

  RunArgs sweep;
  sweep.scenario_path = scenario.string();
  sweep.out_dir = sweep_dir.string();
  sweep.sweeps = {{"framework", {"hat", "ushape"}}};
  REQUIRE(execute(sweep) == 0);

  RunArgs solo;
  solo.scenario_path = scenario.string();
  solo.out_dir = solo_dir.string();
  solo.framework_override = "ushape";
  REQUIRE(execute(solo) == 0);

  CHECK(slurp(sweep_dir / "framework=ushape" / "per_request.csv") ==
        slurp(solo_dir / "per_request.csv"));
}

TEST_CASE("event log emission round-trips") {
  fs::path scenario = write_scenario("log.json");
  fs::path out = scenario.parent_path() / "out_log";
  fs::remove_all(out);

  RunArgs args;
  args.scenario_path = scenario.string();
  args.out_dir = out.string();
  args.emit_event_log = true;
  REQUIRE(execute(args) == 0);
  REQUIRE(fs::exists(out / "events.csv"));

  EventLog log = EventLog::parse(slurp(out / "events.csv"));
  CHECK(log.serialize() == slurp(out / "events.csv"));
  auto records = compute_request_metrics(log);
  CHECK(!records.empty());
}

TEST_CASE("missing scenario fails cleanly") {
  RunArgs args;
  args.scenario_path = "/nonexistent/path.json";
  CHECK(execute(args) == 1);
}
