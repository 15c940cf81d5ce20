#pragma once

/**
 * Greedy draft verification.
 *
 * A draft is checked against the model's own greedy predictions token by
 * token: matches are accepted, the first mismatch is replaced by the model's
 * prediction (the bonus token). A verification step therefore always yields
 * at least one new token and the emitted stream is identical to pure greedy
 * decoding, no matter what the drafter proposed.
 */

#include "specdec/draft_tree.hpp"
#include "specdec/table_lm.hpp"

#include <optional>

namespace specdec {

struct VerificationResult {
  TokenSeq accepted;                 // prefix of the draft path that matched
  TokenId correction = -1;           // model's prediction at the first mismatch, or bonus token
  int accepted_count = 0;
  std::optional<int> rejection_pos;  // index of the first mismatch, if any
};

/// Verifies a linear draft. Predictions are conditioned on the draft tokens
/// themselves, i.e. what a single parallel forward pass over prefix+draft
/// would produce, so the result also exposes the full prediction vector
/// y[0..n] with y[i] following draft[0..i-1].
inline VerificationResult verify_linear(const TableLM& lm, const TokenSeq& prefix,
                                        const TokenSeq& draft,
                                        TokenSeq* predictions_out = nullptr) {
  if (prefix.empty()) throw std::invalid_argument("verify_linear: empty prefix");
  TokenSeq cur = prefix;
  TokenSeq y;
  y.reserve(draft.size() + 1);
  for (TokenId x : draft) {
    y.push_back(greedy_next(lm, cur));
    cur.push_back(x);
  }
  y.push_back(greedy_next(lm, cur));

  VerificationResult res;
  for (std::size_t i = 0; i < draft.size(); ++i) {
    if (draft[i] == y[i]) {
      res.accepted.push_back(draft[i]);
    } else {
      res.correction = y[i];
      res.rejection_pos = static_cast<int>(i);
      break;
    }
  }
  if (!res.rejection_pos) res.correction = y[draft.size()];
  res.accepted_count = static_cast<int>(res.accepted.size());
  if (predictions_out) *predictions_out = std::move(y);
  return res;
}

/// Verifies a token tree by walking it greedily: at each level the child that
/// equals the model's greedy token is accepted and followed. Equivalent to
/// verify_linear on the unique greedy-consistent root-to-leaf path.
inline VerificationResult verify_tree(const TableLM& lm, const TokenSeq& prefix,
                                      const DraftTree& tree) {
  if (prefix.empty()) throw std::invalid_argument("verify_tree: empty prefix");
  tree.validate();

  VerificationResult res;
  TokenSeq cur = prefix;
  const std::vector<int>* level = &tree.roots;
  int depth = 0;
  while (true) {
    TokenId y = greedy_next(lm, cur);
    if (level->empty()) {
      res.correction = y;  // ran out of draft: y is the bonus token
      break;
    }
    int matched = -1;
    for (int id : *level) {
      if (tree.nodes[static_cast<std::size_t>(id)].token == y) {
        matched = id;
        break;
      }
    }
    if (matched < 0) {
      res.correction = y;
      res.rejection_pos = depth;
      break;
    }
    res.accepted.push_back(y);
    cur.push_back(y);
    level = &tree.nodes[static_cast<std::size_t>(matched)].children;
    ++depth;
  }
  res.accepted_count = static_cast<int>(res.accepted.size());
  return res;
}

}  // namespace specdec
