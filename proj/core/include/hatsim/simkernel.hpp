#pragma once

#include <cstdint>
#include <vector>

#include "hatsim/event_log.hpp"
#include "hatsim/metrics.hpp"
#include "hatsim/monitor.hpp"
#include "hatsim/ngram.hpp"
#include "hatsim/scenario.hpp"
#include "hatsim/time.hpp"
#include "hatsim/vocab.hpp"

namespace hatsim {

// Poisson arrival stream: exponential inter-arrival times with mean
// 1/rate, truncated at the horizon. Deterministic given the seed.
std::vector<double> gen_arrivals(double rate_per_s, double horizon_s,
                                 std::uint64_t seed);

// Transmission time of n_tokens hidden states over a link.
double tx_delay(int n_tokens, double bytes_per_token, double bandwidth_Bps);

// The vocabulary, corpus, and target/draft models a scenario's workload
// section describes; the kernel builds exactly these.
struct WorkloadModels {
  Vocabulary vocab;
  std::vector<TokenId> corpus;
  NGramModel target;
  NGramModel draft;
};

WorkloadModels materialize_workload(const Scenario& scenario);

struct RunOptions {
  bool record_log = false;
};

struct RunResult {
  std::vector<RequestRecord> records;        // kernel's online bookkeeping
  std::vector<std::vector<TokenId>> prompts;  // by request id
  std::vector<std::vector<TokenId>> outputs;  // by request id
  EventLog log;                               // populated when record_log
  DelayPredictor predictor;                   // final monitor state
  CloudStateEstimate estimate;
};

// Executes the full device/cloud lifecycle for every request under the
// scenario's framework variant. Single-threaded and deterministic:
// (scenario, seed) fully determines the event log.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

}  // namespace hatsim
