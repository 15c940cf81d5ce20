#pragma once

#include "specdec/vocab.hpp"

#include <algorithm>
#include <vector>

namespace specdec {

/// Unit-cost edit distance between token sequences.
inline int levenshtein(const TokenSeq& a, const TokenSeq& b) {
  std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Edit distance normalized by the longer sequence; 0 for equal inputs,
/// 0 for two empty inputs by convention.
inline double levenshtein_norm(const TokenSeq& a, const TokenSeq& b) {
  std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(denom);
}

}  // namespace specdec
