#include "hatsim/cloudsim.hpp"

#include <algorithm>
#include <stdexcept>

namespace hatsim {

double true_delay(const CloudProfile& profile, int n_tokens) {
  if (n_tokens < 1) throw std::invalid_argument("true_delay: n_tokens must be >= 1");
  int over = std::max(0, n_tokens - profile.saturation_tokens);
  return profile.base_delay + profile.slope * over;
}

const char* work_kind_name(WorkKind kind) {
  switch (kind) {
    case WorkKind::PrefillChunk: return "prefill-chunk";
    case WorkKind::Verify: return "verify";
    case WorkKind::DecodeOne: return "decode-1";
  }
  return "?";
}

void WorkQueue::push(WorkItem item) {
  if (item.token_count < 1) throw std::invalid_argument("WorkQueue: token_count must be >= 1");
  auto pos = std::upper_bound(items_.begin(), items_.end(), item,
                              [](const WorkItem& a, const WorkItem& b) {
                                if (a.ready_ns != b.ready_ns) return a.ready_ns < b.ready_ns;
                                return a.seq < b.seq;
                              });
  items_.insert(pos, std::move(item));
}

std::optional<TimeNs> WorkQueue::earliest_ready() const {
  if (items_.empty()) return std::nullopt;
  return items_.front().ready_ns;
}

bool WorkQueue::any_ready(TimeNs now) const {
  return !items_.empty() && items_.front().ready_ns <= now;
}

std::optional<Batch> WorkQueue::form_batch(TimeNs now, std::int64_t token_cap) {
  Batch batch;
  std::vector<int> requests_with_chunk;
  auto it = items_.begin();
  while (it != items_.end()) {
    if (it->ready_ns > now) break;  // FCFS: later arrivals wait
    const WorkItem& item = *it;
    bool admissible = true;
    if (item.kind == WorkKind::PrefillChunk) {
      auto next = next_chunk_.find(item.request_id);
      int expected = next == next_chunk_.end() ? 0 : next->second;
      bool in_order = item.chunk_index == expected;
      bool already_in_batch =
          std::find(requests_with_chunk.begin(), requests_with_chunk.end(),
                    item.request_id) != requests_with_chunk.end();
      admissible = in_order && !already_in_batch;
    }
    if (!admissible) {
      ++it;
      continue;
    }
    if (token_cap > 0 && batch.total_tokens + item.token_count > token_cap &&
        !batch.items.empty()) {
      break;  // budget spent; no skipping past the blocked item
    }
    if (item.kind == WorkKind::PrefillChunk) {
      requests_with_chunk.push_back(item.request_id);
      next_chunk_[item.request_id] = item.chunk_index + 1;
    }
    batch.total_tokens += item.token_count;
    batch.items.push_back(item);
    it = items_.erase(it);
  }
  if (batch.items.empty()) return std::nullopt;
  return batch;
}

PipelineResult advance_pipeline(PipelineState& state, const Batch& batch,
                                const CloudProfile& profile, TimeNs now) {
  if (now < 0) throw std::invalid_argument("advance_pipeline: now must be >= 0");
  if (batch.total_tokens < 1) throw std::invalid_argument("advance_pipeline: empty batch");
  int stages = static_cast<int>(state.stage_free_at.size());

  TimeNs total = to_ns(true_delay(profile, static_cast<int>(batch.total_tokens)));
  // Integer split that preserves the exact total: the first (total % P)
  // stages run one extra nanosecond.
  TimeNs per_stage = total / stages;
  TimeNs remainder = total % stages;

  PipelineResult result;
  result.stage_exits.resize(stages);
  TimeNs entry = std::max(now, state.stage_free_at[0]);
  for (int s = 0; s < stages; ++s) {
    TimeNs service = per_stage + (s < remainder ? 1 : 0);
    TimeNs start = std::max(entry, state.stage_free_at[s]);
    TimeNs exit = start + service;
    state.stage_free_at[s] = exit;
    result.stage_exits[s] = exit;
    entry = exit;
  }
  result.completion = result.stage_exits[stages - 1];
  return result;
}

}  // namespace hatsim
