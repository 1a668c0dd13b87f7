#include "hatsim/ngram.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace hatsim {

NGramModel::NGramModel(Vocabulary vocab, int order, double smoothing)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing) {
  if (order < 0) throw std::invalid_argument("NGramModel: order must be >= 0");
  if (smoothing < 0.0) {
    throw std::invalid_argument("NGramModel: smoothing must be >= 0");
  }
  tables_.resize(static_cast<std::size_t>(order) + 1);
}

void NGramModel::observe(std::span<const TokenId> context, TokenId next) {
  auto& table = tables_[context.size()];
  auto& cc = table[std::vector<TokenId>(context.begin(), context.end())];
  auto it = std::lower_bound(
      cc.counts.begin(), cc.counts.end(), next,
      [](const auto& p, TokenId t) { return p.first < t; });
  if (it != cc.counts.end() && it->first == next) {
    it->second += 1;
  } else {
    cc.counts.insert(it, {next, 1});
  }
  cc.total += 1;
}

NGramModel NGramModel::build(const Vocabulary& vocab,
                             std::span<const TokenId> corpus, int order,
                             double smoothing) {
  return build_ngram_model(vocab, corpus, order, smoothing);
}

NGramModel build_ngram_model(const Vocabulary& vocab,
                             std::span<const TokenId> corpus, int order,
                             double smoothing) {
  if (corpus.empty()) throw std::invalid_argument("build_ngram_model: empty corpus");
  if (order < 0) throw std::invalid_argument("build_ngram_model: order must be >= 0");
  if (static_cast<std::size_t>(order) >= corpus.size()) {
    throw std::invalid_argument("build_ngram_model: order must be < corpus length");
  }
  for (TokenId t : corpus) {
    if (t < 0 || t >= vocab.size()) {
      throw std::invalid_argument("build_ngram_model: token id out of range");
    }
  }
  NGramModel model(vocab, order, smoothing);
  for (int j = 0; j <= order; ++j) {
    for (std::size_t i = static_cast<std::size_t>(j); i < corpus.size(); ++i) {
      model.observe(corpus.subspan(i - j, j), corpus[i]);
    }
  }
  return model;
}

std::vector<double> NGramModel::next_distribution(
    std::span<const TokenId> context) const {
  int v = vocab_.size();
  int start = std::min<int>(order_, static_cast<int>(context.size()));
  for (int j = start; j >= 0; --j) {
    auto suffix = context.subspan(context.size() - j, j);
    const auto& table = tables_[j];
    auto it = table.find(std::vector<TokenId>(suffix.begin(), suffix.end()));
    if (it == table.end()) continue;
    const auto& cc = it->second;
    double denom = static_cast<double>(cc.total) + smoothing_ * v;
    std::vector<double> dist(v, smoothing_ / denom);
    for (const auto& [token, count] : cc.counts) {
      dist[token] = (static_cast<double>(count) + smoothing_) / denom;
    }
    return dist;
  }
  // unreachable: the length-0 table is always populated for a built model
  throw std::logic_error("next_distribution: model has no unigram table");
}

std::pair<TokenId, double> NGramModel::greedy_next(
    std::span<const TokenId> context) const {
  auto dist = next_distribution(context);
  TokenId best = 0;
  for (int t = 1; t < static_cast<int>(dist.size()); ++t) {
    if (dist[t] > dist[best]) best = t;
  }
  return {best, dist[best]};
}

std::vector<TokenId> NGramModel::greedy_decode(std::span<const TokenId> prompt,
                                               int max_new) const {
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  out.reserve(static_cast<std::size_t>(std::max(0, max_new)));
  for (int i = 0; i < max_new; ++i) {
    auto [token, prob] = greedy_next(context);
    (void)prob;
    out.push_back(token);
    context.push_back(token);
    if (token == vocab_.eos_id()) break;
  }
  return out;
}

}  // namespace hatsim
