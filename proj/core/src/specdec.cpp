#include "hatsim/specdec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hatsim {

DraftSequence draft(const NGramModel& draft_model,
                    std::span<const TokenId> context,
                    const SpecDecodeConfig& cfg) {
  if (context.empty()) throw std::invalid_argument("draft: context must be nonempty");
  if (cfg.max_draft < 1) throw std::invalid_argument("draft: max_draft must be >= 1");

  DraftSequence seq;
  seq.context_len = static_cast<int>(context.size());
  std::vector<TokenId> ctx(context.begin(), context.end());
  TokenId eos = draft_model.vocab().eos_id();
  while (seq.size() < cfg.max_draft) {
    auto [token, prob] = draft_model.greedy_next(ctx);
    seq.tokens.push_back(token);
    seq.probs.push_back(prob);
    ctx.push_back(token);
    if (token == eos) break;
    if (prob < cfg.eta) break;  // below-threshold token is kept
  }
  return seq;
}

VerificationResult verify(const NGramModel& target_model,
                          std::span<const TokenId> context,
                          std::span<const TokenId> draft_tokens) {
  if (draft_tokens.empty()) throw std::invalid_argument("verify: draft must be nonempty");

  std::vector<TokenId> ctx(context.begin(), context.end());
  VerificationResult result;
  for (std::size_t j = 0; j <= draft_tokens.size(); ++j) {
    TokenId expected = target_model.greedy_next(ctx).first;
    if (j == draft_tokens.size() || expected != draft_tokens[j]) {
      result.correction = expected;
      return result;
    }
    result.accepted_count += 1;
    ctx.push_back(draft_tokens[j]);
  }
  return result;  // unreachable
}

SpeculativeOutput speculative_decode(const NGramModel& target,
                                     const NGramModel& draft_model,
                                     std::span<const TokenId> prompt,
                                     const SpecDecodeConfig& cfg, int max_new) {
  SpeculativeOutput out;
  TokenId eos = target.vocab().eos_id();
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  bool done = max_new <= 0;
  while (!done) {
    DraftSequence d = draft(draft_model, context, cfg);
    VerificationResult v = verify(target, context, d.tokens);
    out.rounds.push_back({d.size(), v.accepted_count});

    for (int j = 0; j <= v.accepted_count; ++j) {
      TokenId t = j < v.accepted_count ? d.tokens[j] : v.correction;
      out.tokens.push_back(t);
      context.push_back(t);
      if (t == eos || static_cast<int>(out.tokens.size()) >= max_new) {
        done = true;
        break;
      }
    }
  }
  return out;
}

int plan_parallel_draft(const DeviceState& device, const DelayPredictor& predictor,
                        const CloudStateEstimate& estimate, int draft_len,
                        double hidden_bytes_per_token) {
  if (device.beta_up <= 0.0 || device.beta_down <= 0.0 || device.gamma <= 0.0) {
    throw std::invalid_argument("plan_parallel_draft: device state must be positive");
  }
  if (draft_len < 1) throw std::invalid_argument("plan_parallel_draft: draft_len must be >= 1");

  double payload = draft_len * hidden_bytes_per_token;
  int mu_tokens = static_cast<int>(std::max<long long>(0, std::llround(estimate.mu)));
  double round_trip = payload / device.beta_up + predictor.query(mu_tokens) +
                      payload / device.beta_down;
  return static_cast<int>(std::floor(round_trip / device.gamma));
}

ParallelDraftPlan generate_candidates(const NGramModel& draft_model,
                                      std::span<const TokenId> context,
                                      const DraftSequence& last_draft,
                                      const SpecDecodeConfig& cfg,
                                      int lambda_steps) {
  if (lambda_steps < 0) {
    throw std::invalid_argument("generate_candidates: lambda_steps must be >= 0");
  }
  if (last_draft.size() < 1) {
    throw std::invalid_argument("generate_candidates: draft must be nonempty");
  }

  ParallelDraftPlan plan;
  plan.lambda_steps = lambda_steps;
  plan.assumed_prefix_len = last_draft.size() - 1;

  // Context right before the last draft token was produced.
  std::vector<TokenId> base(context.begin(), context.end());
  base.insert(base.end(), last_draft.tokens.begin(),
              last_draft.tokens.end() - 1);

  auto dist = draft_model.next_distribution(base);
  std::vector<TokenId> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });

  int k = std::min<int>(cfg.top_k, static_cast<int>(dist.size()));
  TokenId eos = draft_model.vocab().eos_id();
  for (int i = 0; i < k; ++i) {
    TokenId candidate = order[i];
    ParallelDraftPlan::Continuation cont;
    if (candidate == eos) {
      cont.complete = true;  // nothing follows eos
      plan.candidates.emplace(candidate, std::move(cont));
      continue;
    }
    if (lambda_steps == 0) {
      plan.candidates.emplace(candidate, std::move(cont));
      continue;
    }
    std::vector<TokenId> ctx = base;
    ctx.push_back(candidate);
    // Same stopping rule as draft(); lambda_steps additionally caps the
    // number of steps the device can afford during the round trip.
    DraftSequence full = draft(draft_model, ctx, cfg);
    int take = std::min(lambda_steps, full.size());
    cont.tokens.assign(full.tokens.begin(), full.tokens.begin() + take);
    cont.probs.assign(full.probs.begin(), full.probs.begin() + take);
    cont.complete = take == full.size();
    plan.candidates.emplace(candidate, std::move(cont));
  }
  return plan;
}

std::optional<ParallelDraftPlan::Continuation> resolve_candidates(
    const ParallelDraftPlan& plan, TokenId correction) {
  auto it = plan.candidates.find(correction);
  if (it == plan.candidates.end()) return std::nullopt;
  return it->second;
}

}  // namespace hatsim
