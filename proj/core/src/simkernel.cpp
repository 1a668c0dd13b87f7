#include "hatsim/simkernel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "hatsim/chunking.hpp"
#include "hatsim/cloudsim.hpp"
#include "hatsim/ngram.hpp"
#include "hatsim/rng.hpp"
#include "hatsim/specdec.hpp"

namespace hatsim {

std::vector<double> gen_arrivals(double rate_per_s, double horizon_s,
                                 std::uint64_t seed) {
  if (rate_per_s < 0.0) throw std::invalid_argument("gen_arrivals: rate must be >= 0");
  std::vector<double> times;
  if (rate_per_s == 0.0) return times;
  Rng rng(seed);
  double t = 0.0;
  while (true) {
    t += rng.exponential(rate_per_s);
    if (t > horizon_s) break;
    times.push_back(t);
  }
  return times;
}

double tx_delay(int n_tokens, double bytes_per_token, double bandwidth_Bps) {
  if (bandwidth_Bps <= 0.0) throw std::invalid_argument("tx_delay: bandwidth must be positive");
  if (n_tokens < 0) throw std::invalid_argument("tx_delay: n_tokens must be >= 0");
  return n_tokens * bytes_per_token / bandwidth_Bps;
}

namespace {

// Synthetic corpus from a second-order source: every (prev2, prev1) pair
// has a preferred successor followed with probability `coherence`. A
// high-order model built from the text recovers that structure almost
// exactly, while a first-order model only sees the per-token marginals,
// so the two correlate without agreeing everywhere.
std::vector<TokenId> gen_synthetic_corpus(const CorpusSpec& spec,
                                          std::uint64_t seed, int vocab_size,
                                          TokenId eos) {
  Rng rng(seed);
  int plain = vocab_size - 1;  // all ids except eos
  // first-order skeleton; a `shared_structure` fraction of the pair table
  // collapses onto it, which is what lets a first-order draft model agree
  // with a second-order target often but not always
  std::vector<TokenId> skeleton(plain);
  for (auto& p : skeleton) p = static_cast<TokenId>(rng.next_below(plain));
  std::vector<TokenId> preferred(static_cast<std::size_t>(plain) * plain);
  for (std::size_t i = 0; i < preferred.size(); ++i) {
    preferred[i] = rng.next_double() < spec.shared_structure
                       ? skeleton[i % plain]
                       : static_cast<TokenId>(rng.next_below(plain));
  }

  std::vector<TokenId> corpus;
  corpus.reserve(spec.length);
  TokenId prev2 = 0;
  TokenId prev1 = plain > 1 ? 1 : 0;
  corpus.push_back(prev2);
  for (int i = 1; i < spec.length; ++i) {
    corpus.push_back(prev1);
    if (rng.next_double() < spec.eos_prob && i + 1 < spec.length) {
      corpus.push_back(eos);
      ++i;
      prev2 = static_cast<TokenId>(rng.next_below(plain));
      prev1 = static_cast<TokenId>(rng.next_below(plain));
      continue;
    }
    TokenId next = rng.next_double() < spec.coherence
                       ? preferred[static_cast<std::size_t>(prev2) * plain + prev1]
                       : static_cast<TokenId>(rng.next_below(plain));
    prev2 = prev1;
    prev1 = next;
  }
  if (static_cast<int>(corpus.size()) < 2) corpus.push_back(0);
  return corpus;
}

}  // namespace

WorkloadModels materialize_workload(const Scenario& scenario) {
  const CorpusSpec& cs = scenario.workload.corpus;
  Vocabulary vocab = [&] {
    if (cs.synthetic) {
      std::vector<std::string> tokens;
      tokens.reserve(cs.vocab_size);
      for (int i = 0; i < cs.vocab_size - 1; ++i) {
        tokens.push_back("t" + std::to_string(i));
      }
      tokens.push_back(cs.eos_token);
      return Vocabulary(std::move(tokens), static_cast<TokenId>(cs.vocab_size - 1));
    }
    return Vocabulary::from_text(cs.text, cs.eos_token);
  }();

  std::vector<TokenId> corpus =
      cs.synthetic ? gen_synthetic_corpus(cs, derive_seed(scenario.seed, "corpus"),
                                          vocab.size(), vocab.eos_id())
                   : vocab.encode(cs.text);
  int max_order =
      std::max(scenario.workload.target_order, scenario.workload.draft_order);
  if (static_cast<int>(corpus.size()) <= max_order) {
    throw ConfigError("workload.corpus: shorter than the model order");
  }
  NGramModel target = build_ngram_model(vocab, corpus, scenario.workload.target_order,
                                        scenario.workload.smoothing);
  NGramModel draft = build_ngram_model(vocab, corpus, scenario.workload.draft_order,
                                       scenario.workload.smoothing);
  return WorkloadModels{std::move(vocab), std::move(corpus), std::move(target),
                        std::move(draft)};
}

namespace {

enum class Ev {
  Arrival,
  ShallowDone,
  UploadDone,
  BatchCheck,
  StageExit,
  DownloadDone,
  HeadDone,
  DraftStep,
  PdStep,
  DecodeUploadStart,
  TokenEmit,
  RequestComplete,
};

struct Event {
  TimeNs time = 0;
  std::uint64_t seq = 0;
  Ev kind = Ev::Arrival;
  int req = -1;
  int a = 0;
  int b = 0;
};

struct EventAfter {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    return x.seq > y.seq;
  }
};

enum class Phase { Prefill, Decode, Done };

struct RequestRt {
  int id = 0;
  int device = 0;
  TimeNs arrival = 0;
  int prompt_len = 0;
  int max_new = 0;
  int chunk_size = 0;
  ChunkPlan plan;

  std::vector<TokenId> prompt;
  std::vector<TokenId> output;
  std::vector<TimeNs> emits;
  std::vector<TokenId> tail;  // rolling model context window
  Phase phase = Phase::Prefill;

  // prefill upload machinery
  std::deque<int> computed_chunks;
  bool uplink_busy = false;

  // decode round state
  DraftSequence cur_draft;
  int decode_roundtrips = 0;
  bool pd_planned = false;
  int pd_epoch = 0;
  TimeNs pd_done = 0;
  ParallelDraftPlan pd_plan;
};

struct DeviceRt {
  DeviceProfile truth;
  const DeviceSpec* spec = nullptr;
  DeviceState est;
  std::deque<int> waiting;
  int active = -1;
  int arrivals_seen = 0;
  Rng mode_rng{0};
};

struct BatchRt {
  Batch batch;
  TimeNs service_total = 0;
};

class Kernel {
 public:
  Kernel(const Scenario& sc, const RunOptions& opt) : sc_(sc), opt_(opt) {}

  RunResult run();

 private:
  // --- scheduling ---------------------------------------------------
  void schedule(TimeNs t, Ev kind, int req, int a = 0, int b = 0) {
    if (t < now_) throw std::logic_error("kernel: scheduled event in the past");
    queue_.push(Event{t, ++seq_, kind, req, a, b});
  }

  void log(const Event& ev, EventKind kind, int req, std::string detail) {
    if (!opt_.record_log) return;
    result_.log.append(LogRecord{ev.time, ev.seq, kind, req, std::move(detail)});
  }

  // --- helpers ------------------------------------------------------
  DeviceRt& dev_of(const RequestRt& r) { return devices_[r.device]; }
  TokenId eos() const { return vocab_->eos_id(); }

  void push_tail(RequestRt& r, TokenId t) {
    r.tail.push_back(t);
    if (r.tail.size() > tail_window_) {
      r.tail.erase(r.tail.begin(), r.tail.end() - tail_window_);
    }
  }

  bool is_chunked() const {
    return sc_.framework == Framework::Hat || sc_.framework == Framework::HatNoPd;
  }
  bool pd_enabled() const { return sc_.framework == Framework::Hat; }
  bool speculative() const { return is_chunked(); }

  void cloud_schedule_check(TimeNs t) {
    if (check_at_ >= 0 && check_at_ <= t) return;
    check_at_ = t;
    schedule(t, Ev::BatchCheck, -1);
  }

  void start_request(DeviceRt& dev, int req_id);
  void try_start_prefill_upload(RequestRt& r);
  void begin_decode_round(RequestRt& r);
  void start_verify_upload(RequestRt& r);
  void emit_tokens(RequestRt& r, const std::vector<TokenId>& tokens);
  void finish_request(const Event& ev, RequestRt& r);

  // --- handlers -----------------------------------------------------
  void on_arrival(const Event& ev);
  void on_shallow_done(const Event& ev);
  void on_upload_done(const Event& ev);
  void on_batch_check(const Event& ev);
  void on_stage_exit(const Event& ev);
  void on_download_done(const Event& ev);
  void on_head_done(const Event& ev);
  void on_draft_step(const Event& ev);
  void on_pd_step(const Event& ev);
  void on_decode_upload_start(const Event& ev);
  void on_token_emit(const Event& ev);
  void on_request_complete(const Event& ev);

  const Scenario& sc_;
  RunOptions opt_;
  RunResult result_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  std::uint64_t seq_ = 0;
  TimeNs now_ = 0;

  std::vector<DeviceRt> devices_;
  std::vector<RequestRt> requests_;

  // cloud
  WorkQueue work_;
  PipelineState pipe_{1};
  DelayPredictor predictor_;
  CloudStateEstimate estimate_;
  std::map<int, BatchRt> batches_;
  int next_batch_id_ = 0;
  TimeNs check_at_ = -1;
  std::uint64_t work_seq_ = 0;

  // models
  std::unique_ptr<WorkloadModels> models_;
  const Vocabulary* vocab_ = nullptr;
  std::vector<TokenId> corpus_;
  const NGramModel* target_ = nullptr;
  const NGramModel* draft_ = nullptr;
  std::size_t tail_window_ = 16;
};

void Kernel::start_request(DeviceRt& dev, int req_id) {
  dev.active = req_id;
  RequestRt& r = requests_[req_id];
  double sh = dev.truth.shallow_s_per_token;
  if (is_chunked()) {
    // per-chunk compute, each chunk uploaded as soon as the link frees
    int c0 = r.plan.boundaries[0].second - r.plan.boundaries[0].first;
    schedule(now_ + to_ns(sh * c0), Ev::ShallowDone, r.id, 0);
  } else {
    // whole prompt computed and uploaded in one piece
    schedule(now_ + to_ns(sh * r.prompt_len), Ev::ShallowDone, r.id, -1);
  }
}

void Kernel::on_arrival(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  DeviceRt& dev = dev_of(r);

  dev.arrivals_seen += 1;
  if (!dev.spec->modes.empty() &&
      dev.arrivals_seen % dev.spec->mode_switch_every == 0) {
    dev.truth = dev.spec->modes[dev.mode_rng.next_below(dev.spec->modes.size())];
  }

  // chunk size is planned once, on arrival, from monitored state
  switch (sc_.framework) {
    case Framework::Hat:
    case Framework::HatNoPd:
      r.chunk_size = solve_chunk_size(predictor_, estimate_, dev.est.beta_up,
                                      sc_.cloud.hidden_bytes_per_token,
                                      sc_.cloud.pipeline_len, r.prompt_len);
      break;
    case Framework::FixedChunk:
      r.chunk_size = std::min(sc_.fixed_chunk_tokens, r.prompt_len);
      break;
    case Framework::UShape:
      r.chunk_size = r.prompt_len;
      break;
  }
  r.plan = split_prompt(r.prompt_len, r.chunk_size);

  log(ev, EventKind::Arrival, r.id,
      "device=" + std::to_string(r.device) +
          " prompt_len=" + std::to_string(r.prompt_len) +
          " chunk=" + std::to_string(r.chunk_size));

  if (dev.active < 0) {
    start_request(dev, r.id);
  } else {
    dev.waiting.push_back(r.id);
  }
}

void Kernel::try_start_prefill_upload(RequestRt& r) {
  if (r.uplink_busy || r.computed_chunks.empty()) return;
  DeviceRt& dev = dev_of(r);
  int j = r.computed_chunks.front();
  r.computed_chunks.pop_front();
  r.uplink_busy = true;
  int tokens = r.plan.boundaries[j].second - r.plan.boundaries[j].first;
  double dur = tx_delay(tokens, sc_.cloud.hidden_bytes_per_token, dev.truth.uplink_Bps);
  schedule(now_ + to_ns(dur), Ev::UploadDone, r.id, j);
}

void Kernel::on_shallow_done(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  DeviceRt& dev = dev_of(r);
  if (ev.a < 0) {
    // whole-prompt compute (ushape / fixed-chunk): single upload
    log(ev, EventKind::LocalComputeDone, r.id,
        "what=shallow tokens=" + std::to_string(r.prompt_len));
    r.uplink_busy = true;
    double dur = tx_delay(r.prompt_len, sc_.cloud.hidden_bytes_per_token,
                          dev.truth.uplink_Bps);
    schedule(now_ + to_ns(dur), Ev::UploadDone, r.id, -1);
    return;
  }
  int j = ev.a;
  int tokens = r.plan.boundaries[j].second - r.plan.boundaries[j].first;
  log(ev, EventKind::LocalComputeDone, r.id,
      "what=shallow chunk=" + std::to_string(j) + " tokens=" + std::to_string(tokens));
  r.computed_chunks.push_back(j);
  try_start_prefill_upload(r);
  if (j + 1 < static_cast<int>(r.plan.boundaries.size())) {
    int next_tokens = r.plan.boundaries[j + 1].second - r.plan.boundaries[j + 1].first;
    schedule(now_ + to_ns(dev.truth.shallow_s_per_token * next_tokens),
             Ev::ShallowDone, r.id, j + 1);
  }
}

void Kernel::on_upload_done(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  r.uplink_busy = false;

  if (r.phase == Phase::Prefill) {
    if (ev.a < 0) {
      // whole prompt arrived: queue every chunk, admitted in order
      log(ev, EventKind::UploadDone, r.id,
          "what=prompt tokens=" + std::to_string(r.prompt_len));
      for (std::size_t j = 0; j < r.plan.boundaries.size(); ++j) {
        int tokens = r.plan.boundaries[j].second - r.plan.boundaries[j].first;
        work_.push(WorkItem{r.id, WorkKind::PrefillChunk, tokens,
                            static_cast<int>(j), now_, ++work_seq_});
      }
    } else {
      int tokens = r.plan.boundaries[ev.a].second - r.plan.boundaries[ev.a].first;
      log(ev, EventKind::UploadDone, r.id,
          "what=chunk index=" + std::to_string(ev.a) +
              " tokens=" + std::to_string(tokens));
      work_.push(WorkItem{r.id, WorkKind::PrefillChunk, tokens, ev.a, now_,
                          ++work_seq_});
      try_start_prefill_upload(r);
    }
    cloud_schedule_check(now_);
    return;
  }

  // decode-phase upload: verification payload or single-token state
  if (speculative()) {
    log(ev, EventKind::UploadDone, r.id,
        "what=verify tokens=" + std::to_string(r.cur_draft.size()));
    work_.push(WorkItem{r.id, WorkKind::Verify, r.cur_draft.size(), 0, now_,
                        ++work_seq_});
  } else {
    log(ev, EventKind::UploadDone, r.id, "what=decode tokens=1");
    work_.push(WorkItem{r.id, WorkKind::DecodeOne, 1, 0, now_, ++work_seq_});
  }
  cloud_schedule_check(now_);
}

void Kernel::on_batch_check(const Event& ev) {
  if (ev.time != check_at_) return;  // superseded by an earlier check
  check_at_ = -1;
  if (pipe_.stage_free_at[0] > now_) {
    cloud_schedule_check(pipe_.stage_free_at[0]);
    return;
  }
  auto batch = work_.form_batch(now_, sc_.cloud.batch_token_cap);
  if (!batch) return;

  int id = next_batch_id_++;
  PipelineResult traj = advance_pipeline(pipe_, *batch, sc_.cloud, now_);
  TimeNs service = traj.completion - now_;

  if (opt_.record_log) {
    std::ostringstream detail;
    detail << "batch=" << id << " tokens=" << batch->total_tokens
           << " service_ns=" << service << " items=";
    for (std::size_t i = 0; i < batch->items.size(); ++i) {
      if (i) detail << '|';
      const auto& it = batch->items[i];
      detail << it.request_id << ':' << work_kind_name(it.kind) << ':'
             << it.token_count;
    }
    log(ev, EventKind::BatchFormed, -1, detail.str());
  }

  for (std::size_t s = 0; s < traj.stage_exits.size(); ++s) {
    schedule(traj.stage_exits[s], Ev::StageExit, -1, id, static_cast<int>(s));
  }
  batches_.emplace(id, BatchRt{std::move(*batch), service});

  if (!work_.empty()) {
    cloud_schedule_check(std::max(now_, pipe_.stage_free_at[0]));
  }
}

void Kernel::on_stage_exit(const Event& ev) {
  int stages = sc_.cloud.pipeline_len;
  log(ev, EventKind::StageDone, -1,
      "batch=" + std::to_string(ev.a) + " stage=" + std::to_string(ev.b));
  if (ev.b != stages - 1) return;

  auto node = batches_.extract(ev.a);
  if (node.empty()) throw std::logic_error("kernel: unknown batch");
  const Batch& batch = node.mapped().batch;

  // the monitor sees every batch completion
  int tokens = static_cast<int>(batch.total_tokens);
  double delay_obs = true_delay(sc_.cloud, tokens);
  predictor_ = predictor_observe(std::move(predictor_), tokens, delay_obs);
  estimate_ = estimate_observe(estimate_, tokens, delay_obs);

  for (const auto& item : batch.items) {
    RequestRt& r = requests_[item.request_id];
    DeviceRt& dev = dev_of(r);
    switch (item.kind) {
      case WorkKind::PrefillChunk: {
        bool last = item.chunk_index + 1 == static_cast<int>(r.plan.boundaries.size());
        if (!last) break;  // intermediate chunks return no payload
        double dur = tx_delay(1, sc_.cloud.hidden_bytes_per_token,
                              dev.truth.downlink_Bps);
        schedule(now_ + to_ns(dur), Ev::DownloadDone, r.id, 0);
        break;
      }
      case WorkKind::Verify: {
        double dur = tx_delay(item.token_count, sc_.cloud.hidden_bytes_per_token,
                              dev.truth.downlink_Bps);
        schedule(now_ + to_ns(dur), Ev::DownloadDone, r.id, 1);
        break;
      }
      case WorkKind::DecodeOne: {
        double dur = tx_delay(1, sc_.cloud.hidden_bytes_per_token,
                              dev.truth.downlink_Bps);
        schedule(now_ + to_ns(dur), Ev::DownloadDone, r.id, 2);
        break;
      }
    }
  }
}

void Kernel::on_download_done(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  DeviceRt& dev = dev_of(r);
  const char* kind = ev.a == 0 ? "prefill" : (ev.a == 1 ? "verify" : "decode");
  log(ev, EventKind::DownloadDone, r.id, std::string("kind=") + kind);

  if (ev.a != 0) r.decode_roundtrips += 1;

  // a completed round trip refreshes the device-state moving averages
  dev.est = device_observe(dev.est, dev.truth.draft_step_s, dev.truth.uplink_Bps,
                           dev.truth.downlink_Bps, sc_.monitor.alpha);

  schedule(now_ + to_ns(dev.truth.head_s), Ev::HeadDone, r.id, ev.a);
}

void Kernel::emit_tokens(RequestRt& r, const std::vector<TokenId>& tokens) {
  // spaced one nanosecond apart so emission timestamps strictly increase
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    bool final_token =
        tokens[j] == eos() ||
        static_cast<int>(r.output.size()) + static_cast<int>(j) + 1 >= r.max_new;
    schedule(now_ + static_cast<TimeNs>(j), Ev::TokenEmit, r.id, tokens[j],
             final_token ? 1 : 0);
    if (final_token) break;
  }
}

void Kernel::on_head_done(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  log(ev, EventKind::LocalComputeDone, r.id, "what=head");

  if (ev.a == 0) {
    // prefill finished: the head produces the first output token
    TokenId first = target_->greedy_next(r.tail).first;
    r.phase = Phase::Decode;
    push_tail(r, first);
    emit_tokens(r, {first});
    bool final_token = first == eos() || r.max_new <= 1;
    if (!final_token) {
      if (speculative()) {
        begin_decode_round(r);
      } else {
        DeviceRt& dev = dev_of(r);
        schedule(now_ + to_ns(dev.truth.shallow_s_per_token), Ev::ShallowDone,
                 r.id, -2);
      }
    }
    return;
  }

  if (ev.a == 2) {
    // plain decode round: one token per trip
    TokenId t = target_->greedy_next(r.tail).first;
    int emitted_after = static_cast<int>(r.output.size()) + 1;
    bool final_token = t == eos() || emitted_after >= r.max_new;
    push_tail(r, t);
    emit_tokens(r, {t});
    if (!final_token) {
      DeviceRt& dev = dev_of(r);
      schedule(now_ + to_ns(dev.truth.shallow_s_per_token), Ev::ShallowDone, r.id,
               -2);
    }
    return;
  }

  // speculative verification result
  VerificationResult v = verify(*target_, r.tail, r.cur_draft.tokens);
  std::vector<TokenId> emitted(r.cur_draft.tokens.begin(),
                               r.cur_draft.tokens.begin() + v.accepted_count);
  emitted.push_back(v.correction);

  bool ends = false;
  int budget = r.max_new - static_cast<int>(r.output.size());
  if (static_cast<int>(emitted.size()) >= budget) ends = true;
  for (TokenId t : emitted) {
    if (t == eos()) ends = true;
  }
  // the model context advances as soon as the result is known; the
  // TokenEmit events that follow are timing bookkeeping
  for (TokenId t : emitted) {
    push_tail(r, t);
    if (t == eos()) break;
  }
  emit_tokens(r, emitted);
  if (ends) {
    r.pd_epoch += 1;  // drop any parallel-draft steps still in flight
    r.pd_planned = false;
    return;  // completion rides on the final TokenEmit
  }

  // next round: a parallel-drafted continuation is usable when the round
  // accepted everything but the last draft token and the correction hit
  DeviceRt& dev = dev_of(r);
  if (r.pd_planned && pd_enabled() &&
      v.accepted_count == r.pd_plan.assumed_prefix_len) {
    auto cont = resolve_candidates(r.pd_plan, v.correction);
    if (cont && cont->complete && !cont->tokens.empty()) {
      TimeNs t_pd = std::max(now_, r.pd_done);
      TimeNs t_redraft =
          now_ + to_ns(dev.truth.draft_step_s) * static_cast<TimeNs>(cont->tokens.size());
      if (t_pd <= t_redraft) {
        // pre-drafted sequence carries straight into the next round
        r.pd_planned = false;
        r.cur_draft.tokens = cont->tokens;
        r.cur_draft.probs = cont->probs;
        r.cur_draft.context_len =
            static_cast<int>(r.prompt.size() + r.output.size() + emitted.size());
        schedule(t_pd, Ev::DecodeUploadStart, r.id);
        return;
      }
    }
  }
  r.pd_planned = false;
  r.pd_epoch += 1;  // stop logging abandoned parallel-draft steps
  begin_decode_round(r);
}

void Kernel::begin_decode_round(RequestRt& r) {
  // drafting happens now; the chain of per-step events re-samples the
  // device's current draft-step delay as modes change
  r.cur_draft = draft(*draft_, r.tail, sc_.specdec);
  DeviceRt& dev = dev_of(r);
  schedule(now_ + to_ns(dev.truth.draft_step_s), Ev::DraftStep, r.id, 1);
}

void Kernel::on_draft_step(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  log(ev, EventKind::DraftStepDone, r.id,
      "step=" + std::to_string(ev.a) + " of=" + std::to_string(r.cur_draft.size()));
  if (ev.a < r.cur_draft.size()) {
    DeviceRt& dev = dev_of(r);
    schedule(now_ + to_ns(dev.truth.draft_step_s), Ev::DraftStep, r.id, ev.a + 1);
    return;
  }
  start_verify_upload(r);
}

void Kernel::start_verify_upload(RequestRt& r) {
  DeviceRt& dev = dev_of(r);
  double dur = tx_delay(r.cur_draft.size(), sc_.cloud.hidden_bytes_per_token,
                        dev.truth.uplink_Bps);
  schedule(now_ + to_ns(dur), Ev::UploadDone, r.id, 0);

  if (pd_enabled()) {
    int lambda = plan_parallel_draft(dev.est, predictor_, estimate_,
                                     r.cur_draft.size(),
                                     sc_.cloud.hidden_bytes_per_token);
    r.pd_plan = generate_candidates(*draft_, r.tail, r.cur_draft, sc_.specdec,
                                    lambda);
    int steps = 0;
    for (const auto& [tok, cont] : r.pd_plan.candidates) {
      steps = std::max(steps, static_cast<int>(cont.tokens.size()));
    }
    r.pd_planned = true;
    r.pd_epoch += 1;
    TimeNs step_ns = to_ns(dev.truth.draft_step_s);
    r.pd_done = now_ + step_ns * steps;
    for (int i = 1; i <= steps; ++i) {
      schedule(now_ + step_ns * i, Ev::PdStep, r.id, i, r.pd_epoch);
    }
  }
}

void Kernel::on_pd_step(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  if (ev.b != r.pd_epoch) return;  // abandoned plan
  log(ev, EventKind::DraftStepDone, r.id,
      "step=" + std::to_string(ev.a) + " parallel=1");
}

void Kernel::on_decode_upload_start(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  start_verify_upload(r);
}

void Kernel::on_token_emit(const Event& ev) {
  RequestRt& r = requests_[ev.req];
  TokenId token = ev.a;
  log(ev, EventKind::TokenEmit, r.id,
      "token=" + std::to_string(token) +
          " index=" + std::to_string(r.output.size()));
  r.output.push_back(token);
  r.emits.push_back(now_);
  if (ev.b == 1) {
    r.phase = Phase::Done;
    schedule(now_, Ev::RequestComplete, r.id);
  }
}

void Kernel::finish_request(const Event& ev, RequestRt& r) {
  log(ev, EventKind::RequestComplete, r.id,
      "tokens=" + std::to_string(r.output.size()) +
          " roundtrips=" + std::to_string(r.decode_roundtrips));

  RequestRecord rec;
  rec.request_id = r.id;
  rec.device_id = r.device;
  rec.prompt_len = r.prompt_len;
  rec.chunk_size = r.chunk_size;
  rec.arrival_ns = r.arrival;
  rec.ttft_ns = r.emits.front() - r.arrival;
  for (std::size_t i = 1; i < r.emits.size(); ++i) {
    rec.tbt_ns.push_back(r.emits[i] - r.emits[i - 1]);
  }
  rec.output_len = static_cast<int>(r.output.size());
  rec.mean_accept_len =
      r.decode_roundtrips > 0
          ? static_cast<double>(rec.output_len - 1) / r.decode_roundtrips
          : 1.0;
  result_.records[r.id] = rec;
  result_.outputs[r.id] = r.output;

  DeviceRt& dev = dev_of(r);
  dev.active = -1;
  if (!dev.waiting.empty()) {
    int next = dev.waiting.front();
    dev.waiting.pop_front();
    start_request(dev, next);
  }
}

void Kernel::on_request_complete(const Event& ev) {
  finish_request(ev, requests_[ev.req]);
}

RunResult Kernel::run() {
  sc_.validate();

  // --- models -------------------------------------------------------
  models_ = std::make_unique<WorkloadModels>(materialize_workload(sc_));
  vocab_ = &models_->vocab;
  corpus_ = models_->corpus;
  target_ = &models_->target;
  draft_ = &models_->draft;
  int max_order = std::max(sc_.workload.target_order, sc_.workload.draft_order);
  tail_window_ = static_cast<std::size_t>(max_order + sc_.specdec.max_draft + 2);

  // --- monitor initial state -----------------------------------------
  predictor_.bin_width = sc_.monitor.bin_width_tokens;
  predictor_.alpha = sc_.monitor.alpha;
  predictor_.default_delay = sc_.monitor.default_delay_s;
  estimate_.alpha = sc_.monitor.alpha;
  pipe_ = PipelineState(sc_.cloud.pipeline_len);

  // --- devices and arrivals ------------------------------------------
  int n_devices = sc_.device_count();
  devices_.resize(n_devices);
  int di = 0;
  for (const auto& spec : sc_.devices) {
    for (int k = 0; k < spec.count; ++k, ++di) {
      DeviceRt& dev = devices_[di];
      dev.spec = &spec;
      dev.truth = spec.profile;
      // devices know their own capabilities at start
      dev.est = DeviceState{spec.profile.draft_step_s, spec.profile.uplink_Bps,
                            spec.profile.downlink_Bps};
      dev.mode_rng = Rng(derive_seed(sc_.seed, "modes/" + std::to_string(di)));
    }
  }

  struct PendingArrival {
    double time_s;
    int device;
  };
  std::vector<PendingArrival> arrivals;
  bool scripted = !sc_.workload.scripted_arrivals_s.empty();
  for (int d = 0; d < n_devices; ++d) {
    if (scripted) {
      for (double t : sc_.workload.scripted_arrivals_s[d]) {
        arrivals.push_back({t, d});
      }
    } else {
      double rate = sc_.workload.rate_per_s / n_devices;
      for (double t : gen_arrivals(rate, sc_.workload.horizon_s,
                                   derive_seed(sc_.seed, "arrivals/" + std::to_string(d)))) {
        arrivals.push_back({t, d});
      }
    }
  }
  std::stable_sort(arrivals.begin(), arrivals.end(),
                   [](const PendingArrival& a, const PendingArrival& b) {
                     if (a.time_s != b.time_s) return a.time_s < b.time_s;
                     return a.device < b.device;
                   });

  std::vector<Rng> prompt_rngs;
  prompt_rngs.reserve(n_devices);
  for (int d = 0; d < n_devices; ++d) {
    prompt_rngs.emplace_back(derive_seed(sc_.seed, "prompts/" + std::to_string(d)));
  }

  requests_.resize(arrivals.size());
  result_.records.resize(arrivals.size());
  result_.outputs.resize(arrivals.size());
  result_.prompts.resize(arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    RequestRt& r = requests_[i];
    r.id = static_cast<int>(i);
    r.device = arrivals[i].device;
    r.arrival = to_ns(arrivals[i].time_s);
    r.max_new = sc_.workload.max_new_tokens;

    Rng& rng = prompt_rngs[r.device];
    r.prompt_len = sc_.workload.prompt_lengths.sample(rng);
    std::size_t offset = rng.next_below(corpus_.size());
    r.prompt.reserve(r.prompt_len);
    for (int j = 0; j < r.prompt_len; ++j) {
      r.prompt.push_back(corpus_[(offset + j) % corpus_.size()]);
    }
    std::size_t tail_at = r.prompt.size() > tail_window_
                              ? r.prompt.size() - tail_window_
                              : 0;
    r.tail.assign(r.prompt.begin() + tail_at, r.prompt.end());
    result_.prompts[i] = r.prompt;

    schedule(r.arrival, Ev::Arrival, r.id);
  }

  // --- main loop ------------------------------------------------------
  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    switch (ev.kind) {
      case Ev::Arrival: on_arrival(ev); break;
      case Ev::ShallowDone:
        if (ev.a == -2) {
          // single-token decode compute finished: upload one state
          RequestRt& r = requests_[ev.req];
          log(ev, EventKind::LocalComputeDone, r.id, "what=shallow tokens=1");
          r.uplink_busy = true;
          double dur = tx_delay(1, sc_.cloud.hidden_bytes_per_token,
                                dev_of(r).truth.uplink_Bps);
          schedule(now_ + to_ns(dur), Ev::UploadDone, r.id, 0);
        } else {
          on_shallow_done(ev);
        }
        break;
      case Ev::UploadDone: on_upload_done(ev); break;
      case Ev::BatchCheck: on_batch_check(ev); break;
      case Ev::StageExit: on_stage_exit(ev); break;
      case Ev::DownloadDone: on_download_done(ev); break;
      case Ev::HeadDone: on_head_done(ev); break;
      case Ev::DraftStep: on_draft_step(ev); break;
      case Ev::PdStep: on_pd_step(ev); break;
      case Ev::DecodeUploadStart: on_decode_upload_start(ev); break;
      case Ev::TokenEmit: on_token_emit(ev); break;
      case Ev::RequestComplete: on_request_complete(ev); break;
    }
  }

  result_.predictor = predictor_;
  result_.estimate = estimate_;
  return result_;
}

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) {
  Kernel kernel(scenario, options);
  return kernel.run();
}

}  // namespace hatsim
