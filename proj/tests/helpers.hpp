#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hatsim/ngram.hpp"
#include "hatsim/rng.hpp"
#include "hatsim/vocab.hpp"

namespace testutil {

// Builds a corpus realizing an exact bigram multiset via a Hierholzer
// circuit, so order-1 models have hand-computable probabilities with no
// pollution from segment joints. Every vertex must be balanced.
inline std::vector<std::string> corpus_from_bigrams(
    const std::vector<std::tuple<std::string, std::string, int>>& edges,
    const std::string& start) {
  std::map<std::string, std::vector<std::string>> adj;
  std::size_t total = 0;
  for (const auto& [u, v, count] : edges) {
    for (int i = 0; i < count; ++i) adj[u].push_back(v);
    total += count;
  }
  std::vector<std::string> circuit;
  std::vector<std::string> stack{start};
  while (!stack.empty()) {
    std::string& u = stack.back();
    auto it = adj.find(u);
    if (it != adj.end() && !it->second.empty()) {
      std::string v = it->second.back();
      it->second.pop_back();
      stack.push_back(v);
    } else {
      circuit.push_back(u);
      stack.pop_back();
    }
  }
  if (circuit.size() != total + 1) {
    throw std::runtime_error("corpus_from_bigrams: edge multiset is not Eulerian");
  }
  return {circuit.rbegin(), circuit.rend()};
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

struct RandomModelCase {
  hatsim::Vocabulary vocab;
  std::vector<hatsim::TokenId> corpus;
  std::vector<hatsim::TokenId> prompt;
};

// Random corpora with markov-ish structure plus occasional eos, and a
// prompt sliced from the corpus.
inline RandomModelCase random_model_case(hatsim::Rng& rng, int max_vocab = 20,
                                         int max_corpus = 400) {
  int v = 3 + static_cast<int>(rng.next_below(max_vocab - 2));
  std::vector<std::string> tokens;
  for (int i = 0; i < v - 1; ++i) tokens.push_back("w" + std::to_string(i));
  tokens.push_back("</s>");
  hatsim::Vocabulary vocab(tokens, v - 1);

  int plain = v - 1;
  int len = 30 + static_cast<int>(rng.next_below(max_corpus - 30));
  std::vector<hatsim::TokenId> preferred(plain);
  for (auto& p : preferred) p = static_cast<hatsim::TokenId>(rng.next_below(plain));
  double coherence = 0.3 + 0.6 * rng.next_double();
  double eos_prob = rng.next_double() < 0.5 ? 0.0 : 0.05;

  std::vector<hatsim::TokenId> corpus;
  hatsim::TokenId cur = 0;
  for (int i = 0; i < len; ++i) {
    corpus.push_back(cur);
    if (rng.next_double() < eos_prob) {
      corpus.push_back(vocab.eos_id());
      ++i;
      cur = static_cast<hatsim::TokenId>(rng.next_below(plain));
      continue;
    }
    cur = rng.next_double() < coherence
              ? preferred[cur]
              : static_cast<hatsim::TokenId>(rng.next_below(plain));
  }

  int plen = 1 + static_cast<int>(rng.next_below(20));
  std::size_t offset = rng.next_below(corpus.size());
  std::vector<hatsim::TokenId> prompt;
  for (int i = 0; i < plen; ++i) {
    prompt.push_back(corpus[(offset + i) % corpus.size()]);
  }
  return {std::move(vocab), std::move(corpus), std::move(prompt)};
}

}  // namespace testutil
