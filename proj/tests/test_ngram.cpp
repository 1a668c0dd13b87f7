#include <cmath>

#include "doctest.h"
#include "hatsim/ngram.hpp"
#include "hatsim/rng.hpp"
#include "hatsim/vocab.hpp"
#include "helpers.hpp"

using namespace hatsim;

namespace {

Vocabulary abc_vocab() {
  return Vocabulary({"a", "b", "c", "d", "e", "</s>"}, 5);
}

}  // namespace

TEST_CASE("vocabulary basics") {
  Vocabulary v = abc_vocab();
  CHECK(v.size() == 6);
  CHECK(v.eos_id() == 5);
  CHECK(v.id_of("c") == 2);
  CHECK(v.id_of("zzz") == -1);
  CHECK_THROWS_AS(Vocabulary({"only"}, 0), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary({"a", "b"}, 7), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary({"a", "a"}, 0), std::invalid_argument);

  Vocabulary w = Vocabulary::from_text("x y x z", "</s>");
  CHECK(w.size() == 4);  // x y z </s>
  CHECK(w.id_of("x") == 0);
  CHECK(w.token(w.eos_id()) == "</s>");
}

TEST_CASE("bigram counts by hand enumeration") {
  // corpus [a,b,a,b,a]: bigrams a->b x2, b->a x2
  Vocabulary v = abc_vocab();
  auto corpus = v.encode("a b a b a");
  auto m = build_ngram_model(v, corpus, 1, 0.0);

  auto ctx_a = v.encode("a");
  auto ctx_b = v.encode("b");
  CHECK(m.next_distribution(ctx_a)[v.id_of("b")] == doctest::Approx(1.0));
  CHECK(m.next_distribution(ctx_b)[v.id_of("a")] == doctest::Approx(1.0));
}

TEST_CASE("unigram symmetric counts") {
  Vocabulary v = abc_vocab();
  auto corpus = v.encode("a a b b");
  auto m = build_ngram_model(v, corpus, 0, 0.0);
  auto dist = m.next_distribution({});
  CHECK(dist[v.id_of("a")] == doctest::Approx(0.5));
  CHECK(dist[v.id_of("b")] == doctest::Approx(0.5));
}

TEST_CASE("build errors") {
  Vocabulary v = abc_vocab();
  std::vector<TokenId> empty;
  CHECK_THROWS_AS(build_ngram_model(v, empty, 0, 0.0), std::invalid_argument);
  auto two = v.encode("a b");
  CHECK_THROWS_AS(build_ngram_model(v, two, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_ngram_model(v, two, 1, -0.5), std::invalid_argument);
}

TEST_CASE("longest-suffix lookup and backoff") {
  Vocabulary v = abc_vocab();
  auto corpus = v.encode("a b a b a");
  auto m = build_ngram_model(v, corpus, 1, 0.0);

  // unseen first token is irrelevant when the last-token suffix is known
  auto ctx = v.encode("c a");
  CHECK(m.next_distribution(ctx)[v.id_of("b")] == doctest::Approx(1.0));

  // a context never seen at length 1 answers with the unigram table
  auto ctx_q = v.encode("c");
  auto dist = m.next_distribution(ctx_q);
  CHECK(dist[v.id_of("a")] == doctest::Approx(3.0 / 5.0));
  CHECK(dist[v.id_of("b")] == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("distribution sums to one on randomized models") {
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    auto c = testutil::random_model_case(rng);
    int order = static_cast<int>(rng.next_below(3));
    double smoothing = rng.next_double() < 0.5 ? 0.0 : rng.next_double();
    auto m = build_ngram_model(c.vocab, c.corpus, order, smoothing);
    auto dist = m.next_distribution(c.prompt);
    double sum = 0.0;
    for (double p : dist) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("greedy_next argmax and tie-break") {
  Vocabulary v = abc_vocab();
  auto m = build_ngram_model(v, v.encode("a b a b a"), 1, 0.0);
  auto [tok, prob] = m.greedy_next(v.encode("a"));
  CHECK(tok == v.id_of("b"));
  CHECK(prob == doctest::Approx(1.0));

  // uniform two-token tie resolves to the lowest id
  auto u = build_ngram_model(v, v.encode("a b a c a"), 1, 0.0);
  auto [t2, p2] = u.greedy_next(v.encode("a"));
  CHECK(t2 == v.id_of("b"));
  CHECK(p2 == doctest::Approx(0.5));

  // returned probability equals the distribution entry
  auto dist = u.next_distribution(v.encode("a"));
  CHECK(p2 == dist[t2]);
}

TEST_CASE("greedy_decode follows deterministic chains") {
  Vocabulary v = abc_vocab();
  // chain a->b, b->c, c->d
  auto m = build_ngram_model(v, v.encode("a b c d"), 1, 0.0);
  auto out = m.greedy_decode(v.encode("a"), 3);
  CHECK(out == v.encode("b c d"));

  CHECK(m.greedy_decode(v.encode("a"), 0).empty());

  // chain a->b, b-></s>: early stop with eos included
  auto e = build_ngram_model(v, v.encode("a b </s>"), 1, 0.0);
  auto out2 = e.greedy_decode(v.encode("a"), 5);
  CHECK(out2 == v.encode("b </s>"));
}

TEST_CASE("greedy_decode is deterministic") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    auto c = testutil::random_model_case(rng);
    auto m = build_ngram_model(c.vocab, c.corpus, 2, 0.0);
    auto a = m.greedy_decode(c.prompt, 32);
    auto b = m.greedy_decode(c.prompt, 32);
    CHECK(a == b);
  }
}

TEST_CASE("smoothing spreads mass over the whole vocabulary") {
  Vocabulary v = abc_vocab();
  auto m = build_ngram_model(v, v.encode("a b a b a"), 1, 1.0);
  auto dist = m.next_distribution(v.encode("a"));
  // counts: b=2 of 2; smoothed: (2+1)/(2+6)
  CHECK(dist[v.id_of("b")] == doctest::Approx(3.0 / 8.0));
  CHECK(dist[v.id_of("c")] == doctest::Approx(1.0 / 8.0));
}
