#include <algorithm>

#include "doctest.h"
#include "hatsim/rng.hpp"
#include "hatsim/specdec.hpp"
#include "helpers.hpp"

using namespace hatsim;

namespace {

// Bigram graph with hand-computable greedy probabilities:
//   P(b|a)=0.9, P(c|b)=0.8, P(d|c)=0.4 (argmax), all other mass spread.
struct ThresholdFixture {
  Vocabulary vocab;
  NGramModel model;

  static ThresholdFixture make() {
    auto corpus_tokens = testutil::corpus_from_bigrams(
        {
            {"a", "b", 9}, {"a", "c", 1},
            {"b", "c", 8}, {"b", "d", 2},
            {"c", "d", 4}, {"c", "e", 3}, {"c", "f", 3},
            {"d", "z", 6}, {"e", "z", 3}, {"f", "z", 3},
            {"z", "a", 10}, {"z", "b", 1}, {"z", "c", 1},
        },
        "a");
    Vocabulary vocab = Vocabulary::from_text(testutil::join(corpus_tokens), "</s>");
    auto corpus = vocab.encode(testutil::join(corpus_tokens));
    NGramModel model = build_ngram_model(vocab, corpus, 1, 0.0);
    return {std::move(vocab), std::move(model)};
  }
};

NGramModel chain_model(const Vocabulary& v, const std::string& text) {
  return build_ngram_model(v, v.encode(text), 1, 0.0);
}

}  // namespace

TEST_CASE("draft stops after the first below-threshold token") {
  auto fx = ThresholdFixture::make();
  SpecDecodeConfig cfg;
  cfg.eta = 0.6;
  cfg.max_draft = 8;

  auto d = draft(fx.model, fx.vocab.encode("a"), cfg);
  REQUIRE(d.size() == 3);
  CHECK(d.tokens == fx.vocab.encode("b c d"));
  CHECK(d.probs[0] == doctest::Approx(0.9));
  CHECK(d.probs[1] == doctest::Approx(0.8));
  CHECK(d.probs[2] == doctest::Approx(0.4));
  CHECK(d.context_len == 1);
}

TEST_CASE("eta zero always reaches max_draft") {
  auto fx = ThresholdFixture::make();
  SpecDecodeConfig cfg;
  cfg.eta = 0.0;
  cfg.max_draft = 5;
  auto d = draft(fx.model, fx.vocab.encode("a"), cfg);
  CHECK(d.size() == 5);
}

TEST_CASE("eta one stops at the first token unless certain") {
  auto fx = ThresholdFixture::make();
  SpecDecodeConfig cfg;
  cfg.eta = 1.0;
  cfg.max_draft = 8;
  auto d = draft(fx.model, fx.vocab.encode("z"), cfg);  // P(a|z) = 10/12
  CHECK(d.size() == 1);
  CHECK(d.probs[0] == doctest::Approx(10.0 / 12.0));
}

TEST_CASE("eos terminates a draft immediately") {
  Vocabulary v({"a", "b", "</s>", "x"}, 2);
  auto m = chain_model(v, "a b </s> x a b </s> x a");
  SpecDecodeConfig cfg;
  cfg.eta = 0.0;
  cfg.max_draft = 8;
  auto d = draft(m, v.encode("a"), cfg);
  CHECK(d.tokens == v.encode("b </s>"));
}

TEST_CASE("draft threshold invariant holds on randomized models") {
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    auto c = testutil::random_model_case(rng);
    auto m = build_ngram_model(c.vocab, c.corpus, 1 + rng.next_below(2), 0.0);
    SpecDecodeConfig cfg;
    double etas[] = {0.0, 0.3, 0.6, 0.9, 1.0};
    cfg.eta = etas[rng.next_below(5)];
    cfg.max_draft = 1 + static_cast<int>(rng.next_below(8));
    auto d = draft(m, c.prompt, cfg);

    REQUIRE(d.size() >= 1);
    REQUIRE(d.size() <= cfg.max_draft);
    for (int j = 0; j + 1 < d.size(); ++j) {
      CHECK(d.probs[j] >= cfg.eta);
      CHECK(d.tokens[j] != c.vocab.eos_id());
    }
    bool last_ok = d.probs.back() < cfg.eta || d.size() == cfg.max_draft ||
                   d.tokens.back() == c.vocab.eos_id();
    CHECK(last_ok);
  }
}

TEST_CASE("verify accepts the matching prefix and corrects") {
  Vocabulary v({"a", "b", "c", "d", "e", "</s>"}, 5);
  auto target = chain_model(v, "a b c d e");

  // draft [b, x] with x wrong: one accepted, correction is c
  auto r1 = verify(target, v.encode("a"), v.encode("b a"));
  CHECK(r1.accepted_count == 1);
  CHECK(r1.correction == v.id_of("c"));

  // fully matching draft earns the bonus token
  auto r2 = verify(target, v.encode("a"), v.encode("b c d"));
  CHECK(r2.accepted_count == 3);
  CHECK(r2.correction == v.id_of("e"));

  // immediate mismatch
  auto r3 = verify(target, v.encode("a"), v.encode("d"));
  CHECK(r3.accepted_count == 0);
  CHECK(r3.correction == v.id_of("b"));
}

TEST_CASE("speculative output equals the greedy oracle") {
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) {
    auto c = testutil::random_model_case(rng);
    int t_order = static_cast<int>(rng.next_below(3));
    int d_order = static_cast<int>(rng.next_below(3));
    auto target = build_ngram_model(c.vocab, c.corpus, t_order, 0.0);
    auto draft_m = build_ngram_model(c.vocab, c.corpus, d_order, 0.0);
    SpecDecodeConfig cfg;
    double etas[] = {0.0, 0.3, 0.6, 0.9, 1.0};
    cfg.eta = etas[rng.next_below(5)];
    cfg.max_draft = 1 + static_cast<int>(rng.next_below(8));
    int max_new = static_cast<int>(rng.next_below(40));

    auto spec = speculative_decode(target, draft_m, c.prompt, cfg, max_new);
    auto oracle = target.greedy_decode(c.prompt, max_new);
    CHECK(spec.tokens == oracle);

    // per round: emitted = accepted + 1 <= max_draft + 1
    for (const auto& round : spec.rounds) {
      CHECK(round.accepted_count <= round.draft_len);
      CHECK(round.draft_len <= cfg.max_draft);
    }
  }
}

TEST_CASE("identical draft and target accept everything") {
  Vocabulary v({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "</s>"}, 10);
  auto m = chain_model(v, "a b c d e f g h i j a");
  SpecDecodeConfig cfg;
  cfg.eta = 0.0;
  cfg.max_draft = 4;
  auto out = speculative_decode(m, m, v.encode("a"), cfg, 20);
  CHECK(out.tokens == m.greedy_decode(v.encode("a"), 20));
  REQUIRE(out.rounds.size() == 4);
  for (const auto& r : out.rounds) {
    CHECK(r.draft_len == 4);
    CHECK(r.accepted_count == 4);  // 5 tokens per round
  }
}

TEST_CASE("max_new zero produces no rounds") {
  auto fx = ThresholdFixture::make();
  auto out = speculative_decode(fx.model, fx.model, fx.vocab.encode("a"),
                                SpecDecodeConfig{}, 0);
  CHECK(out.tokens.empty());
  CHECK(out.rounds.empty());
}

TEST_CASE("plan_parallel_draft evaluates the step budget") {
  DeviceState dev{5e-3, 8e6, 12e6};
  DelayPredictor pred;
  pred.default_delay = 0.010;  // g(mu) = 10 ms with no observations
  CloudStateEstimate est;

  // (4*8192/8e6 + 0.010 + 4*8192/12e6) / 0.005 = 3.365 -> 3
  CHECK(plan_parallel_draft(dev, pred, est, 4, 8192.0) == 3);

  DeviceState slow{10.0, 8e6, 12e6};  // gamma >= numerator
  CHECK(plan_parallel_draft(slow, pred, est, 4, 8192.0) == 0);

  // doubling both bandwidths halves the transmission terms
  DeviceState fast{5e-3, 16e6, 24e6};
  int lam_fast = plan_parallel_draft(fast, pred, est, 4, 8192.0);
  CHECK(lam_fast == 2);  // (2.048 + 10 + 1.365)/5 = 2.68 -> 2

  // lambda is monotone non-increasing in gamma
  int prev = 1 << 30;
  for (double gamma : {1e-3, 2e-3, 4e-3, 8e-3, 16e-3}) {
    DeviceState d{gamma, 8e6, 12e6};
    int lam = plan_parallel_draft(d, pred, est, 4, 8192.0);
    CHECK(lam <= prev);
    prev = lam;
  }
}

TEST_CASE("generate_candidates picks top-k continuations") {
  auto fx = ThresholdFixture::make();
  SpecDecodeConfig cfg;
  cfg.eta = 0.6;
  cfg.max_draft = 8;
  cfg.top_k = 2;

  auto d = draft(fx.model, fx.vocab.encode("a"), cfg);  // b c d
  // distribution at the last step (context ... c): d 0.4, e 0.3, f 0.3;
  // the e/f tie resolves to the lower token id
  auto plan = generate_candidates(fx.model, fx.vocab.encode("a"), d, cfg, 4);
  REQUIRE(plan.candidates.size() == 2);
  CHECK(plan.candidates.count(fx.vocab.id_of("d")) == 1);
  TokenId tied = std::min(fx.vocab.id_of("e"), fx.vocab.id_of("f"));
  CHECK(plan.candidates.count(tied) == 1);
  CHECK(plan.assumed_prefix_len == 2);

  // lambda 0 keeps the keys but empties the continuations
  auto empty_plan = generate_candidates(fx.model, fx.vocab.encode("a"), d, cfg, 0);
  REQUIRE(empty_plan.candidates.size() == 2);
  for (const auto& [tok, cont] : empty_plan.candidates) {
    CHECK(cont.tokens.empty());
  }

  // top-1 equals greedy_next at the last step
  cfg.top_k = 1;
  auto one = generate_candidates(fx.model, fx.vocab.encode("a"), d, cfg, 2);
  REQUIRE(one.candidates.size() == 1);
  CHECK(one.candidates.begin()->first == fx.vocab.id_of("d"));
}

TEST_CASE("candidate continuations follow the draft rule") {
  Rng rng(555);
  for (int i = 0; i < 100; ++i) {
    auto c = testutil::random_model_case(rng);
    auto m = build_ngram_model(c.vocab, c.corpus, 1, 0.0);
    SpecDecodeConfig cfg;
    cfg.eta = 0.5;
    cfg.max_draft = 4;
    cfg.top_k = 3;
    auto d = draft(m, c.prompt, cfg);
    int lambda = static_cast<int>(rng.next_below(6));
    auto plan = generate_candidates(m, c.prompt, d, cfg, lambda);
    for (const auto& [tok, cont] : plan.candidates) {
      CHECK(static_cast<int>(cont.tokens.size()) <= std::min(lambda, cfg.max_draft));
      if (cont.complete && !cont.tokens.empty()) {
        // a complete continuation is exactly the from-scratch draft
        std::vector<TokenId> ctx(c.prompt.begin(), c.prompt.end());
        ctx.insert(ctx.end(), d.tokens.begin(), d.tokens.end() - 1);
        ctx.push_back(tok);
        auto scratch = draft(m, ctx, cfg);
        CHECK(cont.tokens == scratch.tokens);
      }
    }
  }
}

TEST_CASE("resolve_candidates is a plain lookup") {
  ParallelDraftPlan plan;
  plan.candidates[3].tokens = {7, 8};
  plan.candidates[5].tokens = {9};

  auto hit = resolve_candidates(plan, 3);
  REQUIRE(hit.has_value());
  CHECK(hit->tokens == std::vector<TokenId>{7, 8});
  CHECK_FALSE(resolve_candidates(plan, 4).has_value());
  CHECK_FALSE(resolve_candidates(ParallelDraftPlan{}, 3).has_value());
}
