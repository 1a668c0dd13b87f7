#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "hatsim/vocab.hpp"

namespace hatsim {

/// Count-based n-gram model with strict longest-suffix backoff.
///
/// One count table per context length 0..order; a context unseen at
/// length j is answered at length j-1, bottoming out at the always
/// populated unigram table. Add-constant smoothing applies within a
/// seen context's distribution.
class NGramModel {
 public:
  NGramModel(Vocabulary vocab, int order, double smoothing);

  static NGramModel build(const Vocabulary& vocab,
                          std::span<const TokenId> corpus, int order,
                          double smoothing);

  int order() const { return order_; }
  double smoothing() const { return smoothing_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Probability vector over the full vocabulary; components sum to 1.
  std::vector<double> next_distribution(std::span<const TokenId> context) const;

  // Argmax of next_distribution; ties broken by lowest token id.
  std::pair<TokenId, double> greedy_next(std::span<const TokenId> context) const;

  // Autoregressive greedy continuation of at most max_new tokens,
  // stopping after eos is emitted (eos included in the output).
  std::vector<TokenId> greedy_decode(std::span<const TokenId> prompt,
                                     int max_new) const;

 private:
  struct ContextCounts {
    std::vector<std::pair<TokenId, std::int64_t>> counts;  // sorted by token
    std::int64_t total = 0;
  };

  void observe(std::span<const TokenId> context, TokenId next);
  friend NGramModel build_ngram_model(const Vocabulary& vocab,
                                      std::span<const TokenId> corpus,
                                      int order, double smoothing);

  Vocabulary vocab_;
  int order_;
  double smoothing_;
  // tables_[j]: contexts of length j.
  std::vector<std::map<std::vector<TokenId>, ContextCounts>> tables_;
};

NGramModel build_ngram_model(const Vocabulary& vocab,
                             std::span<const TokenId> corpus, int order,
                             double smoothing);

}  // namespace hatsim
