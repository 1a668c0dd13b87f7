#include "hatsim/runner.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace hatsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string slug_of(const std::vector<std::pair<std::string, std::string>>& point) {
  if (point.empty()) return "base";
  std::string slug;
  for (const auto& [k, v] : point) {
    if (!slug.empty()) slug += "_";
    std::string kk = k;
    for (char& c : kk) {
      if (c == '.') c = '-';
    }
    slug += kk + "=" + v;
  }
  return slug;
}

}  // namespace

Scenario apply_override(const Scenario& base, const std::string& key,
                        const std::string& json_value) {
  json root = json::parse(serialize_scenario(base));
  json value;
  try {
    value = json::parse(json_value);
  } catch (const json::exception&) {
    value = json_value;  // bare strings (e.g. framework names) pass through
  }
  json* node = &root;
  std::size_t pos = 0;
  std::string path = key;
  while (true) {
    std::size_t dot = path.find('.', pos);
    std::string part = path.substr(pos, dot - pos);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
  return parse_scenario(root.dump());
}

std::string per_request_csv(const std::vector<RequestRecord>& records,
                            Framework framework, const SlaSpec& slas) {
  std::vector<RequestRecord> copy = records;
  sla_compliance(copy, slas.prefill_s_per_128_tokens, slas.decode_s_per_10_tokens);

  std::ostringstream out;
  out << "request_id,device_id,framework,prompt_len,chunk_size,ttft_ns,"
         "mean_tbt_ns,p99_tbt_ns,output_len,prefill_ok,decode_ok\n";
  for (const auto& r : copy) {
    double mean_tbt = 0.0;
    double p99 = 0.0;
    if (!r.tbt_ns.empty()) {
      std::vector<double> tbts;
      double sum = 0.0;
      for (TimeNs t : r.tbt_ns) {
        tbts.push_back(static_cast<double>(t));
        sum += static_cast<double>(t);
      }
      mean_tbt = sum / static_cast<double>(tbts.size());
      p99 = percentile(tbts, 0.99);
    }
    out << r.request_id << ',' << r.device_id << ',' << framework_name(framework)
        << ',' << r.prompt_len << ',' << r.chunk_size << ',' << r.ttft_ns << ','
        << fmt_double(mean_tbt) << ',' << static_cast<std::int64_t>(p99) << ','
        << r.output_len << ',' << (r.prefill_compliant ? 1 : 0) << ','
        << (r.decode_compliant ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string summary_csv_header() {
  return "scenario,framework,seed,sweep,requests,mean_ttft_ns,median_ttft_ns,"
         "p90_ttft_ns,mean_tbt_ns,prefill_sla_rate,decode_sla_rate,"
         "mean_accept_len\n";
}

std::string summary_csv_row(const std::string& scenario_name, Framework framework,
                            std::uint64_t seed, const std::string& sweep_slug,
                            const SummaryStats& s) {
  std::ostringstream out;
  out << scenario_name << ',' << framework_name(framework) << ',' << seed << ','
      << sweep_slug << ',' << s.requests << ',' << fmt_double(s.mean_ttft_ns)
      << ',' << fmt_double(s.median_ttft_ns) << ',' << fmt_double(s.p90_ttft_ns)
      << ',' << fmt_double(s.mean_tbt_ns) << ',' << fmt_double(s.prefill_sla_rate)
      << ',' << fmt_double(s.decode_sla_rate) << ','
      << fmt_double(s.mean_accept_len) << '\n';
  return out.str();
}

std::string predictor_csv(const DelayPredictor& predictor) {
  std::ostringstream out;
  out << "bin,token_lo,token_hi,delay_s\n";
  for (const auto& [bin, delay] : predictor.bins) {
    out << bin << ',' << bin * predictor.bin_width << ','
        << (bin + 1) * predictor.bin_width - 1 << ',' << fmt_double(delay) << '\n';
  }
  return out.str();
}

int execute(const RunArgs& args) {
  std::ifstream in(args.scenario_path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open scenario '%s'\n",
                 args.scenario_path.c_str());
    return 1;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();

  Scenario base = parse_scenario(buffer.str());
  if (args.seed_override) base.seed = *args.seed_override;
  if (args.framework_override) {
    base.framework = framework_from_name(*args.framework_override);
  }

  // cross product of sweep values, in declared order
  std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
  for (const auto& sweep : args.sweeps) {
    if (sweep.values.empty()) {
      std::fprintf(stderr, "error: sweep '%s' has no values\n", sweep.key.c_str());
      return 1;
    }
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& point : points) {
      for (const auto& value : sweep.values) {
        auto extended = point;
        extended.emplace_back(sweep.key, value);
        next.push_back(std::move(extended));
      }
    }
    points = std::move(next);
  }

  fs::create_directories(args.out_dir);
  std::string scenario_name = fs::path(args.scenario_path).stem().string();

  struct PointResult {
    std::string slug;
    std::string summary_row;
  };
  std::vector<PointResult> results(points.size());
  std::vector<std::string> errors(points.size());

  auto run_point = [&](std::size_t idx) {
    const auto& point = points[idx];
    try {
      Scenario scenario = base;
      for (const auto& [k, v] : point) scenario = apply_override(scenario, k, v);

      RunOptions opt;
      opt.record_log = args.emit_event_log;
      RunResult result = run(scenario, opt);

      std::string slug = slug_of(point);
      fs::path dir = points.size() == 1 ? fs::path(args.out_dir)
                                        : fs::path(args.out_dir) / slug;
      fs::create_directories(dir);

      write_file_atomic(dir / "per_request.csv",
                        per_request_csv(result.records, scenario.framework,
                                        scenario.slas));
      write_file_atomic(dir / "effective_config.json", serialize_scenario(scenario));
      write_file_atomic(dir / "predictor.csv", predictor_csv(result.predictor));
      if (args.emit_event_log) {
        write_file_atomic(dir / "events.csv", result.log.serialize());
      }

      std::vector<RequestRecord> records = result.records;
      SummaryStats stats = summarize(records, scenario.slas.prefill_s_per_128_tokens,
                                     scenario.slas.decode_s_per_10_tokens);
      results[idx] = {slug, summary_csv_row(scenario_name, scenario.framework,
                                            scenario.seed, slug, stats)};
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  };

  int jobs = std::max(1, args.jobs);
  if (jobs == 1 || points.size() <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> workers;
    int n = std::min<int>(jobs, static_cast<int>(points.size()));
    for (int w = 0; w < n; ++w) {
      workers.emplace_back([&] {
        while (true) {
          std::size_t i = cursor.fetch_add(1);
          if (i >= points.size()) break;
          run_point(i);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i].empty()) {
      std::fprintf(stderr, "error: %s\n", errors[i].c_str());
      return 1;
    }
  }

  // summary rows in declared point order, independent of execution order
  std::string summary = summary_csv_header();
  for (const auto& r : results) summary += r.summary_row;
  write_file_atomic(fs::path(args.out_dir) / "summary.csv", summary);
  return 0;
}

}  // namespace hatsim
