#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hatsim {

using TokenId = std::int32_t;

// Token alphabet. Ids are dense 0..V-1 in insertion order; one id is
// designated end-of-sequence.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, TokenId eos_id);

  // Builds the vocabulary from whitespace-separated token text, ids in
  // order of first appearance. The eos token string is appended if it
  // never occurs in the text.
  static Vocabulary from_text(const std::string& text,
                              const std::string& eos_token);

  int size() const { return static_cast<int>(tokens_.size()); }
  TokenId eos_id() const { return eos_id_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // -1 if unknown.
  TokenId id_of(const std::string& token) const;

  std::vector<TokenId> encode(const std::string& text) const;

 private:
  std::vector<std::string> tokens_;
  TokenId eos_id_;
};

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace hatsim
