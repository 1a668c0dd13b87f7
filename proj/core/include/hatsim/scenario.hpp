#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hatsim/cloudsim.hpp"
#include "hatsim/specdec.hpp"

namespace hatsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Framework { Hat, UShape, FixedChunk, HatNoPd };

const char* framework_name(Framework fw);
Framework framework_from_name(const std::string& name);

// True (not estimated) capabilities of a device; a mode switch swaps the
// whole profile.
struct DeviceProfile {
  double shallow_s_per_token = 4.39e-5;
  double head_s = 5e-4;
  double draft_step_s = 2e-3;
  double uplink_Bps = 8e6;
  double downlink_Bps = 12e6;
};

struct DeviceSpec {
  int count = 1;
  DeviceProfile profile;
  std::vector<DeviceProfile> modes;  // optional alternates, picked at random
  int mode_switch_every = 5;         // requests between switches
};

struct PromptLengthDist {
  enum class Kind { Constant, Uniform, Lognormal, Mixture };
  struct MixtureComponent {
    double weight = 1.0;
    double mean = 220.0;
    double stddev = 90.0;
  };
  Kind kind = Kind::Constant;
  int value = 128;          // constant
  int min = 16;             // clamp (uniform bounds double as clamp)
  int max = 3000;
  double log_mean = 5.0;    // lognormal
  double log_std = 0.8;
  std::vector<MixtureComponent> components;

  int sample(class Rng& rng) const;
};

struct CorpusSpec {
  // Either inline whitespace-separated token text or a synthetic
  // markov-style corpus.
  std::string text;
  bool synthetic = true;
  int vocab_size = 64;
  int length = 12000;
  double coherence = 0.85;  // probability of following the preferred successor
  double shared_structure = 0.5;  // pair preferences that collapse to first order
  double eos_prob = 0.02;
  std::string eos_token = "</s>";
};

struct WorkloadSpec {
  double rate_per_s = 0.2;   // aggregate over all devices
  double horizon_s = 60.0;
  int max_new_tokens = 128;
  PromptLengthDist prompt_lengths;
  CorpusSpec corpus;
  int target_order = 2;
  int draft_order = 1;
  double smoothing = 0.0;
  double distill_w_ce = 0.1;
  // Optional explicit per-device arrival times; overrides the Poisson
  // stream when nonempty.
  std::vector<std::vector<double>> scripted_arrivals_s;
};

struct MonitorSpec {
  double alpha = 0.8;
  int bin_width_tokens = 16;
  double default_delay_s = 0.025;
};

struct SlaSpec {
  double prefill_s_per_128_tokens = 0.3;
  double decode_s_per_10_tokens = 0.25;
};

struct Scenario {
  std::uint64_t seed = 1;
  Framework framework = Framework::Hat;
  std::vector<DeviceSpec> devices = {DeviceSpec{}};
  CloudProfile cloud;
  WorkloadSpec workload;
  SpecDecodeConfig specdec;
  MonitorSpec monitor;
  SlaSpec slas;
  int fixed_chunk_tokens = 128;

  int device_count() const;
  void validate() const;  // throws ConfigError naming the offending field
};

// Parses the JSON scenario text; omitted fields take documented
// defaults, unknown keys are rejected with the full field path.
Scenario parse_scenario(const std::string& text);

// Serializes every field (defaults included); parse(serialize(s)) == s.
std::string serialize_scenario(const Scenario& scenario);

bool operator==(const Scenario& a, const Scenario& b);

}  // namespace hatsim
