#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hatsim/metrics.hpp"
#include "hatsim/scenario.hpp"
#include "hatsim/simkernel.hpp"

namespace hatsim {

struct SweepSpec {
  std::string key;                  // dotted path into the scenario JSON
  std::vector<std::string> values;  // JSON-parsed scalars
};

struct RunArgs {
  std::string scenario_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> framework_override;
  std::string out_dir = "out";
  std::vector<SweepSpec> sweeps;  // cross product when several
  bool emit_event_log = false;
  int jobs = 1;
};

// Applies a sweep override (dotted key, JSON scalar value) to a scenario.
Scenario apply_override(const Scenario& base, const std::string& key,
                        const std::string& json_value);

std::string per_request_csv(const std::vector<RequestRecord>& records,
                            Framework framework, const SlaSpec& slas);
std::string summary_csv_header();
std::string summary_csv_row(const std::string& scenario_name, Framework framework,
                            std::uint64_t seed, const std::string& sweep_slug,
                            const SummaryStats& stats);
std::string predictor_csv(const DelayPredictor& predictor);

// Runs every (scenario x framework x sweep point), writing per-request
// and summary CSVs plus an effective-config dump per point. Output bytes
// are independent of `jobs`.
int execute(const RunArgs& args);

}  // namespace hatsim
