#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Bijective mapping between token strings and dense ids.
class Vocab {
public:
  Vocab() = default;

  explicit Vocab(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
  }

  TokenId add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }

  TokenId id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end())
      throw std::invalid_argument("vocab: unknown token '" + token + "'");
    return it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  bool contains(TokenId id) const {
    return id >= 0 && id < static_cast<TokenId>(tokens_.size());
  }

  const std::string& str(TokenId id) const {
    if (!contains(id))
      throw std::invalid_argument("vocab: token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenSeq encode(const std::vector<std::string>& words) const {
    TokenSeq out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id(w));
    return out;
  }

  std::vector<std::string> decode(const TokenSeq& seq) const {
    std::vector<std::string> out;
    out.reserve(seq.size());
    for (TokenId t : seq) out.push_back(str(t));
    return out;
  }

private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId> ids_;
};

}  // namespace specdec
