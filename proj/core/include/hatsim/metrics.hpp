#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hatsim/event_log.hpp"
#include "hatsim/time.hpp"

namespace hatsim {

struct RequestRecord {
  int request_id = 0;
  int device_id = 0;
  int prompt_len = 0;
  int chunk_size = 0;
  TimeNs arrival_ns = 0;
  TimeNs ttft_ns = 0;
  std::vector<TimeNs> tbt_ns;  // output_len - 1 entries
  int output_len = 0;
  double mean_accept_len = 1.0;  // tokens per decode round trip
  bool prefill_compliant = false;
  bool decode_compliant = false;
};

bool same_timing(const RequestRecord& a, const RequestRecord& b);

// Rebuilds per-request metrics from the raw event trace alone; serves as
// the oracle against the kernel's online bookkeeping. Throws on
// incomplete logs or out-of-order emissions.
std::vector<RequestRecord> compute_request_metrics(const EventLog& log);

struct SlaRates {
  double prefill_rate = 1.0;
  double decode_rate = 1.0;
  bool vacuous = false;  // no records; rates are the stated convention
};

// Prefill: ttft within prefill_sla * prompt_len / 128. Decode: every
// sliding window of 10 consecutive inter-token gaps within decode_sla;
// outputs shorter than 11 tokens use the scaled total instead. Updates
// the per-record compliance flags.
SlaRates sla_compliance(std::vector<RequestRecord>& records,
                        double prefill_sla_s, double decode_sla_s);

// Empirical CDF: ascending values with cumulative fraction; duplicate
// values collapse to the highest fraction.
std::vector<std::pair<double, double>> cdf(const std::vector<double>& values);

struct SummaryStats {
  std::size_t requests = 0;
  double mean_ttft_ns = 0.0;
  double median_ttft_ns = 0.0;
  double p90_ttft_ns = 0.0;
  double mean_tbt_ns = 0.0;
  double prefill_sla_rate = 1.0;
  double decode_sla_rate = 1.0;
  double mean_accept_len = 0.0;
};

SummaryStats summarize(std::vector<RequestRecord>& records, double prefill_sla_s,
                       double decode_sla_s);

// Nearest-rank percentile (p in [0,1]) of an unsorted sample.
double percentile(std::vector<double> values, double p);

}  // namespace hatsim
