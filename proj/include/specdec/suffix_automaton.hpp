#pragma once

/**
 * Online suffix automaton over token sequences.
 *
 * Recognizes exactly the substrings of the indexed sequence and supports
 * one-token extension in amortized O(1). Each state records the end position
 * of the first occurrence of its strings, which lets a drafter copy the
 * continuation following a match without rescanning the source.
 */

#include "specdec/vocab.hpp"

#include <map>
#include <vector>

namespace specdec {

class SuffixAutomaton {
public:
  struct State {
    std::map<TokenId, int> next;
    int link = -1;
    int len = 0;
    int first_endpos = -1;
  };

  SuffixAutomaton() { states_.push_back(State{}); }

  explicit SuffixAutomaton(const TokenSeq& tokens) : SuffixAutomaton() {
    for (TokenId t : tokens) extend(t);
  }

  void extend(TokenId token) {
    int pos = static_cast<int>(source_.size());
    source_.push_back(token);
    int cur = new_state();
    states_[cur].len = states_[last_].len + 1;
    states_[cur].first_endpos = pos;
    int p = last_;
    while (p != -1 && !states_[p].next.count(token)) {
      states_[p].next[token] = cur;
      p = states_[p].link;
    }
    if (p == -1) {
      states_[cur].link = 0;
    } else {
      int q = states_[p].next[token];
      if (states_[p].len + 1 == states_[q].len) {
        states_[cur].link = q;
      } else {
        int clone = new_state();
        states_[clone] = states_[q];
        states_[clone].len = states_[p].len + 1;
        // the clone's strings occurred wherever q's did, so the first
        // occurrence carries over
        while (p != -1 && states_[p].next.count(token) &&
               states_[p].next[token] == q) {
          states_[p].next[token] = clone;
          p = states_[p].link;
        }
        states_[q].link = clone;
        states_[cur].link = clone;
      }
    }
    last_ = cur;
  }

  bool contains(const TokenSeq& pattern) const {
    int v = 0;
    for (TokenId t : pattern) {
      auto it = states_[v].next.find(t);
      if (it == states_[v].next.end()) return false;
      v = it->second;
    }
    return true;
  }

  /// Longest suffix of `query` that occurs in the source. Returns
  /// (state, match length); state's class contains the matched string.
  std::pair<int, int> longest_suffix_match(const TokenSeq& query) const {
    int v = 0;
    int len = 0;
    for (TokenId t : query) {
      while (v != 0 && !states_[v].next.count(t)) {
        v = states_[v].link;
        len = states_[v].len;
      }
      auto it = states_[v].next.find(t);
      if (it != states_[v].next.end()) {
        v = it->second;
        ++len;
      } else {
        v = 0;
        len = 0;
      }
    }
    return {v, len};
  }

  const State& state(int id) const { return states_[static_cast<std::size_t>(id)]; }
  int state_count() const { return static_cast<int>(states_.size()); }
  const TokenSeq& source() const { return source_; }

  int transition_count() const {
    int n = 0;
    for (const auto& s : states_) n += static_cast<int>(s.next.size());
    return n;
  }

private:
  int new_state() {
    states_.push_back(State{});
    return static_cast<int>(states_.size()) - 1;
  }

  std::vector<State> states_;
  TokenSeq source_;
  int last_ = 0;
};

inline SuffixAutomaton build_automaton(const TokenSeq& tokens) {
  return SuffixAutomaton(tokens);
}

}  // namespace specdec
