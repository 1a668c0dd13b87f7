#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "hatsim/time.hpp"

namespace hatsim {

// Ground-truth cloud compute model: flat base delay up to a saturation
// token count, then linear growth.
struct CloudProfile {
  int pipeline_len = 4;            // P stages
  double base_delay = 0.025;       // seconds
  int saturation_tokens = 64;
  double slope = 1.285e-4;         // seconds per token beyond saturation
  double hidden_bytes_per_token = 8192.0;
  std::int64_t batch_token_cap = 0;  // 0 = uncapped
};

double true_delay(const CloudProfile& profile, int n_tokens);

enum class WorkKind { PrefillChunk, Verify, DecodeOne };

const char* work_kind_name(WorkKind kind);

struct WorkItem {
  int request_id = 0;
  WorkKind kind = WorkKind::DecodeOne;
  int token_count = 1;
  int chunk_index = 0;     // prefill chunks only
  TimeNs ready_ns = 0;     // payload fully arrived
  std::uint64_t seq = 0;   // arrival tie-break
};

struct Batch {
  std::vector<WorkItem> items;
  std::int64_t total_tokens = 0;
};

// FCFS queue of cloud work. Prefill chunks of one request are admitted
// strictly in index order, at most one per batch.
class WorkQueue {
 public:
  void push(WorkItem item);
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }

  // Earliest ready time among pending items, or nullopt.
  std::optional<TimeNs> earliest_ready() const;
  bool any_ready(TimeNs now) const;

  // Removes and returns the batch formed at `now`, or nullopt if no work
  // is ready.
  std::optional<Batch> form_batch(TimeNs now, std::int64_t token_cap = 0);

 private:
  std::deque<WorkItem> items_;                 // FCFS by (ready_ns, seq)
  std::map<int, int> next_chunk_;              // request -> next admissible index
};

struct PipelineState {
  std::vector<TimeNs> stage_free_at;

  explicit PipelineState(int stages = 1) : stage_free_at(stages, 0) {}
};

struct PipelineResult {
  TimeNs completion = 0;
  std::vector<TimeNs> stage_exits;
};

// Runs the batch through the P sequential stages. Total service time is
// true_delay(total_tokens) in nanoseconds, split across stages so the
// per-stage sum is exact for any P.
PipelineResult advance_pipeline(PipelineState& state, const Batch& batch,
                                const CloudProfile& profile, TimeNs now);

}  // namespace hatsim
