#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hatsim/monitor.hpp"
#include "hatsim/ngram.hpp"

namespace hatsim {

struct SpecDecodeConfig {
  double eta = 0.6;   // drafting threshold
  int max_draft = 8;  // cap on drafted tokens per round
  int top_k = 3;      // candidate tokens for parallel drafting
};

// One round's draft: greedy tokens with their probabilities. Drafting
// stops after the first token whose probability falls below eta (that
// token is kept as the last draft token), at max_draft, or at eos.
struct DraftSequence {
  std::vector<TokenId> tokens;
  std::vector<double> probs;
  int context_len = 0;  // tokens preceding the draft

  int size() const { return static_cast<int>(tokens.size()); }
};

struct VerificationResult {
  int accepted_count = 0;  // matched draft tokens
  TokenId correction = 0;  // target's next token after the accepted prefix
};

// Pre-generated continuations for the top-k candidate corrections of the
// last draft position. A continuation is usable as the next round's
// draft when the round accepted everything but the last draft token and
// the correction hits its key.
struct ParallelDraftPlan {
  struct Continuation {
    std::vector<TokenId> tokens;
    std::vector<double> probs;
    // true when the continuation stopped on its own (threshold, eos or
    // max_draft) rather than being cut off by lambda_steps
    bool complete = false;
  };
  int lambda_steps = 0;
  std::map<TokenId, Continuation> candidates;
  int assumed_prefix_len = 0;  // draft tokens assumed accepted (= draft len - 1)
};

struct RoundStats {
  int draft_len = 0;
  int accepted_count = 0;
};

struct SpeculativeOutput {
  std::vector<TokenId> tokens;
  std::vector<RoundStats> rounds;
};

DraftSequence draft(const NGramModel& draft_model,
                    std::span<const TokenId> context,
                    const SpecDecodeConfig& cfg);

VerificationResult verify(const NGramModel& target_model,
                          std::span<const TokenId> context,
                          std::span<const TokenId> draft_tokens);

// Full draft/verify loop. The emitted token stream is exactly
// greedy_decode(target, prompt, max_new).
SpeculativeOutput speculative_decode(const NGramModel& target,
                                     const NGramModel& draft_model,
                                     std::span<const TokenId> prompt,
                                     const SpecDecodeConfig& cfg, int max_new);

// Drafting steps that fit into one verification round trip:
// floor((draft_len*A/beta_up + g(mu) + draft_len*A/beta_down) / gamma).
int plan_parallel_draft(const DeviceState& device, const DelayPredictor& predictor,
                        const CloudStateEstimate& estimate, int draft_len,
                        double hidden_bytes_per_token);

// Greedy continuations of up to lambda_steps tokens seeded by the top-k
// tokens of the draft model's distribution at the last draft step.
ParallelDraftPlan generate_candidates(const NGramModel& draft_model,
                                      std::span<const TokenId> context,
                                      const DraftSequence& last_draft,
                                      const SpecDecodeConfig& cfg,
                                      int lambda_steps);

std::optional<ParallelDraftPlan::Continuation> resolve_candidates(
    const ParallelDraftPlan& plan, TokenId correction);

}  // namespace hatsim
