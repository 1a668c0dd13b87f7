#include "hatsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace hatsim {

namespace {

// detail strings are space-separated k=v pairs
std::string detail_value(const std::string& detail, const std::string& key) {
  std::size_t pos = 0;
  std::string needle = key + "=";
  while (pos < detail.size()) {
    std::size_t end = detail.find(' ', pos);
    if (end == std::string::npos) end = detail.size();
    if (detail.compare(pos, needle.size(), needle) == 0) {
      return detail.substr(pos + needle.size(), end - pos - needle.size());
    }
    pos = end + 1;
  }
  return {};
}

struct Accum {
  bool arrived = false;
  bool completed = false;
  RequestRecord rec;
  std::vector<TimeNs> emits;
  int decode_roundtrips = 0;
};

}  // namespace

bool same_timing(const RequestRecord& a, const RequestRecord& b) {
  return a.request_id == b.request_id && a.device_id == b.device_id &&
         a.prompt_len == b.prompt_len && a.chunk_size == b.chunk_size &&
         a.arrival_ns == b.arrival_ns && a.ttft_ns == b.ttft_ns &&
         a.tbt_ns == b.tbt_ns && a.output_len == b.output_len &&
         a.mean_accept_len == b.mean_accept_len;
}

std::vector<RequestRecord> compute_request_metrics(const EventLog& log) {
  std::map<int, Accum> by_request;
  for (const auto& r : log.records()) {
    switch (r.kind) {
      case EventKind::Arrival: {
        Accum& a = by_request[r.request_id];
        if (a.arrived) throw std::invalid_argument("metrics: duplicate arrival");
        a.arrived = true;
        a.rec.request_id = r.request_id;
        a.rec.arrival_ns = r.time_ns;
        a.rec.device_id = std::stoi(detail_value(r.detail, "device"));
        a.rec.prompt_len = std::stoi(detail_value(r.detail, "prompt_len"));
        a.rec.chunk_size = std::stoi(detail_value(r.detail, "chunk"));
        break;
      }
      case EventKind::TokenEmit: {
        Accum& a = by_request[r.request_id];
        if (!a.arrived) throw std::invalid_argument("metrics: emission before arrival");
        if (!a.emits.empty() && r.time_ns <= a.emits.back()) {
          throw std::invalid_argument("metrics: emissions out of order");
        }
        a.emits.push_back(r.time_ns);
        break;
      }
      case EventKind::DownloadDone: {
        Accum& a = by_request[r.request_id];
        std::string kind = detail_value(r.detail, "kind");
        if (kind == "verify" || kind == "decode") a.decode_roundtrips += 1;
        break;
      }
      case EventKind::RequestComplete: {
        Accum& a = by_request[r.request_id];
        if (!a.arrived || a.emits.empty()) {
          throw std::invalid_argument("metrics: completion without emissions");
        }
        a.completed = true;
        break;
      }
      default:
        break;
    }
  }

  std::vector<RequestRecord> out;
  out.reserve(by_request.size());
  for (auto& [id, a] : by_request) {
    if (!a.completed) {
      throw std::invalid_argument("metrics: request " + std::to_string(id) +
                                  " has no completion (incomplete log)");
    }
    a.rec.ttft_ns = a.emits.front() - a.rec.arrival_ns;
    if (a.rec.ttft_ns <= 0) throw std::invalid_argument("metrics: nonpositive ttft");
    a.rec.output_len = static_cast<int>(a.emits.size());
    a.rec.tbt_ns.clear();
    for (std::size_t i = 1; i < a.emits.size(); ++i) {
      a.rec.tbt_ns.push_back(a.emits[i] - a.emits[i - 1]);
    }
    a.rec.mean_accept_len =
        a.decode_roundtrips > 0
            ? static_cast<double>(a.rec.output_len - 1) / a.decode_roundtrips
            : 1.0;
    out.push_back(std::move(a.rec));
  }
  return out;
}

SlaRates sla_compliance(std::vector<RequestRecord>& records, double prefill_sla_s,
                        double decode_sla_s) {
  if (prefill_sla_s <= 0.0 || decode_sla_s <= 0.0) {
    throw std::invalid_argument("sla_compliance: SLAs must be positive");
  }
  SlaRates rates;
  if (records.empty()) {
    rates.vacuous = true;
    return rates;
  }
  std::size_t prefill_ok = 0;
  std::size_t decode_ok = 0;
  for (auto& rec : records) {
    double budget = prefill_sla_s * (static_cast<double>(rec.prompt_len) / 128.0);
    rec.prefill_compliant = to_seconds(rec.ttft_ns) <= budget;

    bool ok = true;
    std::size_t n = rec.tbt_ns.size();
    if (n >= 10) {
      TimeNs window = 0;
      for (std::size_t i = 0; i < n; ++i) {
        window += rec.tbt_ns[i];
        if (i >= 10) window -= rec.tbt_ns[i - 10];
        if (i >= 9 && to_seconds(window) > decode_sla_s) {
          ok = false;
          break;
        }
      }
    } else {
      TimeNs total = 0;
      for (TimeNs t : rec.tbt_ns) total += t;
      ok = to_seconds(total) <= decode_sla_s * (static_cast<double>(n) / 10.0);
    }
    rec.decode_compliant = ok;

    prefill_ok += rec.prefill_compliant ? 1 : 0;
    decode_ok += rec.decode_compliant ? 1 : 0;
  }
  rates.prefill_rate = static_cast<double>(prefill_ok) / records.size();
  rates.decode_rate = static_cast<double>(decode_ok) / records.size();
  return rates;
}

std::vector<std::pair<double, double>> cdf(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("cdf: empty input");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  std::size_t n = sorted.size();
  for (std::size_t i = 0; i < n; ++i) {
    double frac = static_cast<double>(i + 1) / static_cast<double>(n);
    if (!out.empty() && out.back().first == sorted[i]) {
      out.back().second = frac;  // duplicates collapse to the last fraction
    } else {
      out.emplace_back(sorted[i], frac);
    }
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  std::sort(values.begin(), values.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(values.size())));
  if (rank == 0) rank = 1;
  return values[rank - 1];
}

SummaryStats summarize(std::vector<RequestRecord>& records, double prefill_sla_s,
                       double decode_sla_s) {
  SummaryStats s;
  s.requests = records.size();
  if (records.empty()) return s;

  auto rates = sla_compliance(records, prefill_sla_s, decode_sla_s);
  s.prefill_sla_rate = rates.prefill_rate;
  s.decode_sla_rate = rates.decode_rate;

  std::vector<double> ttfts;
  double ttft_sum = 0.0;
  double tbt_sum = 0.0;
  std::size_t tbt_count = 0;
  double accept_sum = 0.0;
  for (const auto& rec : records) {
    ttfts.push_back(static_cast<double>(rec.ttft_ns));
    ttft_sum += static_cast<double>(rec.ttft_ns);
    for (TimeNs t : rec.tbt_ns) {
      tbt_sum += static_cast<double>(t);
      tbt_count += 1;
    }
    accept_sum += rec.mean_accept_len;
  }
  s.mean_ttft_ns = ttft_sum / static_cast<double>(records.size());
  s.median_ttft_ns = percentile(ttfts, 0.5);
  s.p90_ttft_ns = percentile(ttfts, 0.9);
  s.mean_tbt_ns = tbt_count > 0 ? tbt_sum / static_cast<double>(tbt_count) : 0.0;
  s.mean_accept_len = accept_sum / static_cast<double>(records.size());
  return s;
}

}  // namespace hatsim
