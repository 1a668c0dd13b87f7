#include "hatsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hatsim/rng.hpp"
#include "json.hpp"

namespace hatsim {

using nlohmann::json;

const char* framework_name(Framework fw) {
  switch (fw) {
    case Framework::Hat: return "hat";
    case Framework::UShape: return "ushape";
    case Framework::FixedChunk: return "fixed-chunk";
    case Framework::HatNoPd: return "hat-no-pd";
  }
  return "?";
}

Framework framework_from_name(const std::string& name) {
  if (name == "hat") return Framework::Hat;
  if (name == "ushape") return Framework::UShape;
  if (name == "fixed-chunk") return Framework::FixedChunk;
  if (name == "hat-no-pd") return Framework::HatNoPd;
  throw ConfigError("framework: expected one of hat, ushape, fixed-chunk, hat-no-pd; got '" +
                    name + "'");
}

int PromptLengthDist::sample(Rng& rng) const {
  double raw = 0.0;
  switch (kind) {
    case Kind::Constant:
      return value;
    case Kind::Uniform:
      return min + static_cast<int>(rng.next_below(
                       static_cast<std::uint64_t>(max - min + 1)));
    case Kind::Lognormal:
      raw = std::exp(rng.normal(log_mean, log_std));
      break;
    case Kind::Mixture: {
      double total = 0.0;
      for (const auto& c : components) total += c.weight;
      double pick = rng.next_double() * total;
      double acc = 0.0;
      raw = components.back().mean;
      for (const auto& c : components) {
        acc += c.weight;
        if (pick < acc) {
          raw = rng.normal(c.mean, c.stddev);
          break;
        }
      }
      break;
    }
  }
  int len = static_cast<int>(std::llround(raw));
  return std::clamp(len, min, max);
}

int Scenario::device_count() const {
  int n = 0;
  for (const auto& d : devices) n += d.count;
  return n;
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_profile(const DeviceProfile& p, const std::string& path) {
  require(p.shallow_s_per_token > 0, path + ".shallow_s_per_token: must be > 0");
  require(p.head_s > 0, path + ".head_s: must be > 0");
  require(p.draft_step_s > 0, path + ".draft_step_s: must be > 0");
  require(p.uplink_Bps > 0, path + ".uplink_Bps: must be > 0");
  require(p.downlink_Bps > 0, path + ".downlink_Bps: must be > 0");
}

}  // namespace

void Scenario::validate() const {
  require(!devices.empty(), "devices: at least one device group required");
  for (std::size_t i = 0; i < devices.size(); ++i) {
    std::string path = "devices[" + std::to_string(i) + "]";
    require(devices[i].count >= 1, path + ".count: must be >= 1");
    check_profile(devices[i].profile, path);
    for (std::size_t m = 0; m < devices[i].modes.size(); ++m) {
      check_profile(devices[i].modes[m], path + ".modes[" + std::to_string(m) + "]");
    }
    require(devices[i].mode_switch_every >= 1, path + ".mode_switch_every: must be >= 1");
  }
  require(cloud.pipeline_len >= 1, "cloud.pipeline_len: must be >= 1");
  require(cloud.base_delay > 0, "cloud.base_delay_s: must be > 0");
  require(cloud.saturation_tokens >= 1, "cloud.saturation_tokens: must be >= 1");
  require(cloud.slope >= 0, "cloud.slope_s_per_token: must be >= 0");
  require(cloud.hidden_bytes_per_token > 0, "cloud.hidden_bytes_per_token: must be > 0");
  require(cloud.batch_token_cap >= 0, "cloud.batch_token_cap: must be >= 0");

  bool scripted = !workload.scripted_arrivals_s.empty();
  require(workload.rate_per_s > 0 || scripted,
          "workload.rate_per_s: must be > 0 (or provide scripted_arrivals_s)");
  require(workload.rate_per_s >= 0, "workload.rate_per_s: must be >= 0");
  require(workload.horizon_s > 0, "workload.horizon_s: must be > 0");
  require(workload.max_new_tokens >= 1, "workload.max_new_tokens: must be >= 1");
  if (scripted) {
    require(static_cast<int>(workload.scripted_arrivals_s.size()) == device_count(),
            "workload.scripted_arrivals_s: need one list per device");
  }
  const auto& pl = workload.prompt_lengths;
  require(pl.min >= 1, "workload.prompt_lengths.min: must be >= 1");
  require(pl.max >= pl.min, "workload.prompt_lengths.max: must be >= min");
  if (pl.kind == PromptLengthDist::Kind::Constant) {
    require(pl.value >= 1, "workload.prompt_lengths.value: must be >= 1");
  }
  if (pl.kind == PromptLengthDist::Kind::Mixture) {
    require(!pl.components.empty(), "workload.prompt_lengths.components: must be nonempty");
    for (const auto& c : pl.components) {
      require(c.weight > 0, "workload.prompt_lengths.components: weights must be > 0");
      require(c.stddev >= 0, "workload.prompt_lengths.components: stddev must be >= 0");
    }
  }
  if (workload.corpus.synthetic) {
    require(workload.corpus.vocab_size >= 2, "workload.corpus.vocab_size: must be >= 2");
    require(workload.corpus.length >= 2, "workload.corpus.length: must be >= 2");
    require(workload.corpus.coherence >= 0 && workload.corpus.coherence <= 1,
            "workload.corpus.coherence: must be within [0,1]");
    require(workload.corpus.shared_structure >= 0 && workload.corpus.shared_structure <= 1,
            "workload.corpus.shared_structure: must be within [0,1]");
    require(workload.corpus.eos_prob >= 0 && workload.corpus.eos_prob < 1,
            "workload.corpus.eos_prob: must be within [0,1)");
  } else {
    require(!workload.corpus.text.empty(), "workload.corpus.text: must be nonempty");
  }
  require(workload.target_order >= 0, "workload.target_order: must be >= 0");
  require(workload.draft_order >= 0, "workload.draft_order: must be >= 0");
  require(workload.smoothing >= 0, "workload.smoothing: must be >= 0");
  require(workload.distill_w_ce >= 0, "workload.distill_w_ce: must be >= 0");

  require(specdec.eta >= 0 && specdec.eta <= 1,
          "specdec.eta: expected value in [0,1], got " + fmt(specdec.eta));
  require(specdec.max_draft >= 1, "specdec.max_draft: must be >= 1");
  require(specdec.top_k >= 1, "specdec.top_k: must be >= 1");

  require(monitor.alpha >= 0 && monitor.alpha <= 1,
          "monitor.alpha: expected value in [0,1], got " + fmt(monitor.alpha));
  require(monitor.bin_width_tokens >= 1, "monitor.bin_width_tokens: must be >= 1");
  require(monitor.default_delay_s > 0, "monitor.default_delay_s: must be > 0");

  require(slas.prefill_s_per_128_tokens > 0, "slas.prefill_s_per_128_tokens: must be > 0");
  require(slas.decode_s_per_10_tokens > 0, "slas.decode_s_per_10_tokens: must be > 0");
  require(fixed_chunk_tokens >= 1, "fixed_chunk_tokens: must be >= 1");
}

namespace {

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError((path.empty() ? it.key() : path + "." + it.key()) +
                        ": unknown key");
    }
  }
}

template <typename T>
void get_to(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ConfigError((path.empty() ? std::string(key) : path + "." + key) +
                      ": wrong type");
  }
}

DeviceProfile parse_profile(const json& j, const std::string& path,
                            const DeviceProfile& base) {
  reject_unknown(j, path, {"shallow_s_per_token", "head_s", "draft_step_s",
                           "uplink_Bps", "downlink_Bps"});
  DeviceProfile p = base;
  get_to(j, path, "shallow_s_per_token", p.shallow_s_per_token);
  get_to(j, path, "head_s", p.head_s);
  get_to(j, path, "draft_step_s", p.draft_step_s);
  get_to(j, path, "uplink_Bps", p.uplink_Bps);
  get_to(j, path, "downlink_Bps", p.downlink_Bps);
  return p;
}

json profile_to_json(const DeviceProfile& p) {
  return json{{"shallow_s_per_token", p.shallow_s_per_token},
              {"head_s", p.head_s},
              {"draft_step_s", p.draft_step_s},
              {"uplink_Bps", p.uplink_Bps},
              {"downlink_Bps", p.downlink_Bps}};
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("scenario: top level must be an object");

  Scenario s;
  reject_unknown(root, "",
                 {"seed", "framework", "devices", "cloud", "workload", "specdec",
                  "monitor", "slas", "fixed_chunk_tokens"});
  get_to(root, "", "seed", s.seed);
  if (root.contains("framework")) {
    s.framework = framework_from_name(root.at("framework").get<std::string>());
  }
  get_to(root, "", "fixed_chunk_tokens", s.fixed_chunk_tokens);

  if (root.contains("devices")) {
    const json& devices = root.at("devices");
    if (!devices.is_array()) throw ConfigError("devices: must be an array");
    s.devices.clear();
    for (std::size_t i = 0; i < devices.size(); ++i) {
      std::string path = "devices[" + std::to_string(i) + "]";
      const json& dj = devices[i];
      reject_unknown(dj, path,
                     {"count", "shallow_s_per_token", "head_s", "draft_step_s",
                      "uplink_Bps", "downlink_Bps", "modes", "mode_switch_every"});
      DeviceSpec spec;
      get_to(dj, path, "count", spec.count);
      // profile fields live directly on the group object
      get_to(dj, path, "shallow_s_per_token", spec.profile.shallow_s_per_token);
      get_to(dj, path, "head_s", spec.profile.head_s);
      get_to(dj, path, "draft_step_s", spec.profile.draft_step_s);
      get_to(dj, path, "uplink_Bps", spec.profile.uplink_Bps);
      get_to(dj, path, "downlink_Bps", spec.profile.downlink_Bps);
      get_to(dj, path, "mode_switch_every", spec.mode_switch_every);
      if (dj.contains("modes")) {
        const json& modes = dj.at("modes");
        if (!modes.is_array()) throw ConfigError(path + ".modes: must be an array");
        for (std::size_t m = 0; m < modes.size(); ++m) {
          spec.modes.push_back(parse_profile(
              modes[m], path + ".modes[" + std::to_string(m) + "]", spec.profile));
        }
      }
      s.devices.push_back(std::move(spec));
    }
  }

  if (root.contains("cloud")) {
    const json& cj = root.at("cloud");
    reject_unknown(cj, "cloud",
                   {"pipeline_len", "base_delay_s", "saturation_tokens",
                    "slope_s_per_token", "hidden_bytes_per_token", "batch_token_cap"});
    get_to(cj, "cloud", "pipeline_len", s.cloud.pipeline_len);
    get_to(cj, "cloud", "base_delay_s", s.cloud.base_delay);
    get_to(cj, "cloud", "saturation_tokens", s.cloud.saturation_tokens);
    get_to(cj, "cloud", "slope_s_per_token", s.cloud.slope);
    get_to(cj, "cloud", "hidden_bytes_per_token", s.cloud.hidden_bytes_per_token);
    get_to(cj, "cloud", "batch_token_cap", s.cloud.batch_token_cap);
  }

  if (root.contains("workload")) {
    const json& wj = root.at("workload");
    reject_unknown(wj, "workload",
                   {"rate_per_s", "horizon_s", "max_new_tokens", "prompt_lengths",
                    "corpus", "target_order", "draft_order", "smoothing",
                    "distill_w_ce", "scripted_arrivals_s"});
    get_to(wj, "workload", "rate_per_s", s.workload.rate_per_s);
    get_to(wj, "workload", "horizon_s", s.workload.horizon_s);
    get_to(wj, "workload", "max_new_tokens", s.workload.max_new_tokens);
    get_to(wj, "workload", "target_order", s.workload.target_order);
    get_to(wj, "workload", "draft_order", s.workload.draft_order);
    get_to(wj, "workload", "smoothing", s.workload.smoothing);
    get_to(wj, "workload", "distill_w_ce", s.workload.distill_w_ce);
    get_to(wj, "workload", "scripted_arrivals_s", s.workload.scripted_arrivals_s);

    if (wj.contains("prompt_lengths")) {
      const json& pj = wj.at("prompt_lengths");
      std::string path = "workload.prompt_lengths";
      reject_unknown(pj, path, {"kind", "value", "min", "max", "log_mean",
                                "log_std", "components"});
      auto& pl = s.workload.prompt_lengths;
      std::string kind = "constant";
      get_to(pj, path, "kind", kind);
      if (kind == "constant") pl.kind = PromptLengthDist::Kind::Constant;
      else if (kind == "uniform") pl.kind = PromptLengthDist::Kind::Uniform;
      else if (kind == "lognormal") pl.kind = PromptLengthDist::Kind::Lognormal;
      else if (kind == "mixture") pl.kind = PromptLengthDist::Kind::Mixture;
      else throw ConfigError(path + ".kind: expected constant|uniform|lognormal|mixture");
      get_to(pj, path, "value", pl.value);
      get_to(pj, path, "min", pl.min);
      get_to(pj, path, "max", pl.max);
      get_to(pj, path, "log_mean", pl.log_mean);
      get_to(pj, path, "log_std", pl.log_std);
      if (pj.contains("components")) {
        const json& comps = pj.at("components");
        if (!comps.is_array()) throw ConfigError(path + ".components: must be an array");
        pl.components.clear();
        for (std::size_t i = 0; i < comps.size(); ++i) {
          std::string cpath = path + ".components[" + std::to_string(i) + "]";
          reject_unknown(comps[i], cpath, {"weight", "mean", "stddev"});
          PromptLengthDist::MixtureComponent c;
          get_to(comps[i], cpath, "weight", c.weight);
          get_to(comps[i], cpath, "mean", c.mean);
          get_to(comps[i], cpath, "stddev", c.stddev);
          pl.components.push_back(c);
        }
      }
    }

    if (wj.contains("corpus")) {
      const json& cj = wj.at("corpus");
      std::string path = "workload.corpus";
      reject_unknown(cj, path, {"text", "vocab_size", "length", "coherence",
                                "shared_structure", "eos_prob", "eos_token"});
      auto& corpus = s.workload.corpus;
      if (cj.contains("text")) {
        corpus.synthetic = false;
        get_to(cj, path, "text", corpus.text);
      }
      get_to(cj, path, "vocab_size", corpus.vocab_size);
      get_to(cj, path, "length", corpus.length);
      get_to(cj, path, "coherence", corpus.coherence);
      get_to(cj, path, "shared_structure", corpus.shared_structure);
      get_to(cj, path, "eos_prob", corpus.eos_prob);
      get_to(cj, path, "eos_token", corpus.eos_token);
    }
  }

  if (root.contains("specdec")) {
    const json& dj = root.at("specdec");
    reject_unknown(dj, "specdec", {"eta", "max_draft", "top_k"});
    get_to(dj, "specdec", "eta", s.specdec.eta);
    get_to(dj, "specdec", "max_draft", s.specdec.max_draft);
    get_to(dj, "specdec", "top_k", s.specdec.top_k);
  }

  if (root.contains("monitor")) {
    const json& mj = root.at("monitor");
    reject_unknown(mj, "monitor", {"alpha", "bin_width_tokens", "default_delay_s"});
    get_to(mj, "monitor", "alpha", s.monitor.alpha);
    get_to(mj, "monitor", "bin_width_tokens", s.monitor.bin_width_tokens);
    get_to(mj, "monitor", "default_delay_s", s.monitor.default_delay_s);
  }

  if (root.contains("slas")) {
    const json& sj = root.at("slas");
    reject_unknown(sj, "slas", {"prefill_s_per_128_tokens", "decode_s_per_10_tokens"});
    get_to(sj, "slas", "prefill_s_per_128_tokens", s.slas.prefill_s_per_128_tokens);
    get_to(sj, "slas", "decode_s_per_10_tokens", s.slas.decode_s_per_10_tokens);
  }

  s.validate();
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  json root;
  root["seed"] = s.seed;
  root["framework"] = framework_name(s.framework);
  root["fixed_chunk_tokens"] = s.fixed_chunk_tokens;

  json devices = json::array();
  for (const auto& d : s.devices) {
    json dj = profile_to_json(d.profile);
    dj["count"] = d.count;
    dj["mode_switch_every"] = d.mode_switch_every;
    if (!d.modes.empty()) {
      json modes = json::array();
      for (const auto& m : d.modes) modes.push_back(profile_to_json(m));
      dj["modes"] = modes;
    }
    devices.push_back(dj);
  }
  root["devices"] = devices;

  root["cloud"] = json{{"pipeline_len", s.cloud.pipeline_len},
                       {"base_delay_s", s.cloud.base_delay},
                       {"saturation_tokens", s.cloud.saturation_tokens},
                       {"slope_s_per_token", s.cloud.slope},
                       {"hidden_bytes_per_token", s.cloud.hidden_bytes_per_token},
                       {"batch_token_cap", s.cloud.batch_token_cap}};

  json pl;
  const auto& p = s.workload.prompt_lengths;
  switch (p.kind) {
    case PromptLengthDist::Kind::Constant: pl["kind"] = "constant"; break;
    case PromptLengthDist::Kind::Uniform: pl["kind"] = "uniform"; break;
    case PromptLengthDist::Kind::Lognormal: pl["kind"] = "lognormal"; break;
    case PromptLengthDist::Kind::Mixture: pl["kind"] = "mixture"; break;
  }
  pl["value"] = p.value;
  pl["min"] = p.min;
  pl["max"] = p.max;
  pl["log_mean"] = p.log_mean;
  pl["log_std"] = p.log_std;
  if (!p.components.empty()) {
    json comps = json::array();
    for (const auto& c : p.components) {
      comps.push_back(json{{"weight", c.weight}, {"mean", c.mean}, {"stddev", c.stddev}});
    }
    pl["components"] = comps;
  }

  json corpus;
  if (!s.workload.corpus.synthetic) {
    corpus["text"] = s.workload.corpus.text;
  }
  corpus["vocab_size"] = s.workload.corpus.vocab_size;
  corpus["length"] = s.workload.corpus.length;
  corpus["coherence"] = s.workload.corpus.coherence;
  corpus["shared_structure"] = s.workload.corpus.shared_structure;
  corpus["eos_prob"] = s.workload.corpus.eos_prob;
  corpus["eos_token"] = s.workload.corpus.eos_token;

  json workload;
  workload["rate_per_s"] = s.workload.rate_per_s;
  workload["horizon_s"] = s.workload.horizon_s;
  workload["max_new_tokens"] = s.workload.max_new_tokens;
  workload["prompt_lengths"] = pl;
  workload["corpus"] = corpus;
  workload["target_order"] = s.workload.target_order;
  workload["draft_order"] = s.workload.draft_order;
  workload["smoothing"] = s.workload.smoothing;
  workload["distill_w_ce"] = s.workload.distill_w_ce;
  if (!s.workload.scripted_arrivals_s.empty()) {
    workload["scripted_arrivals_s"] = s.workload.scripted_arrivals_s;
  }
  root["workload"] = workload;

  root["specdec"] = json{{"eta", s.specdec.eta},
                         {"max_draft", s.specdec.max_draft},
                         {"top_k", s.specdec.top_k}};
  root["monitor"] = json{{"alpha", s.monitor.alpha},
                         {"bin_width_tokens", s.monitor.bin_width_tokens},
                         {"default_delay_s", s.monitor.default_delay_s}};
  root["slas"] = json{{"prefill_s_per_128_tokens", s.slas.prefill_s_per_128_tokens},
                      {"decode_s_per_10_tokens", s.slas.decode_s_per_10_tokens}};
  return root.dump(2) + "\n";
}

bool operator==(const Scenario& a, const Scenario& b) {
  return serialize_scenario(a) == serialize_scenario(b);
}

}  // namespace hatsim
