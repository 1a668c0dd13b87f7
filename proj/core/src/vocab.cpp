#include "hatsim/vocab.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace hatsim {

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId eos_id)
    : tokens_(std::move(tokens)), eos_id_(eos_id) {
  if (tokens_.size() < 2) {
    throw std::invalid_argument("Vocabulary: need at least 2 tokens");
  }
  if (eos_id_ < 0 || eos_id_ >= static_cast<TokenId>(tokens_.size())) {
    throw std::invalid_argument("Vocabulary: eos_id out of range");
  }
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens_) {
    if (!seen.insert(t).second) {
      throw std::invalid_argument("Vocabulary: duplicate token '" + t + "'");
    }
  }
}

Vocabulary Vocabulary::from_text(const std::string& text,
                                 const std::string& eos_token) {
  std::vector<std::string> tokens;
  std::unordered_set<std::string> seen;
  for (auto& w : split_whitespace(text)) {
    if (seen.insert(w).second) tokens.push_back(w);
  }
  if (!seen.count(eos_token)) tokens.push_back(eos_token);
  TokenId eos = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == eos_token) eos = static_cast<TokenId>(i);
  }
  if (tokens.size() < 2) tokens.push_back(eos_token + "_pad");
  return Vocabulary(std::move(tokens), eos);
}

TokenId Vocabulary::id_of(const std::string& token) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] == token) return static_cast<TokenId>(i);
  }
  return -1;
}

std::vector<TokenId> Vocabulary::encode(const std::string& text) const {
  std::vector<TokenId> out;
  for (auto& w : split_whitespace(text)) {
    TokenId id = id_of(w);
    if (id < 0) throw std::invalid_argument("encode: unknown token '" + w + "'");
    out.push_back(id);
  }
  return out;
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace hatsim
