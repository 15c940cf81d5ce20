#include "specdec/suffix_automaton.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace specdec;

namespace {

TokenSeq random_seq(std::mt19937_64& rng, int len, int alphabet) {
  TokenSeq s;
  for (int i = 0; i < len; ++i)
    s.push_back(static_cast<TokenId>(rng() % static_cast<std::uint64_t>(alphabet)));
  return s;
}

// every substring, for exhaustive membership checks
std::vector<TokenSeq> all_substrings(const TokenSeq& s, int max_len) {
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t l = 1; l <= s.size() - i && static_cast<int>(l) <= max_len; ++l)
      out.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(i),
                       s.begin() + static_cast<std::ptrdiff_t>(i + l));
  return out;
}

}  // namespace

TEST_CASE("empty automaton accepts only the empty string", "[sam]") {
  SuffixAutomaton sam = build_automaton({});
  CHECK(sam.contains({}));
  CHECK_FALSE(sam.contains({0}));
  CHECK(sam.state_count() == 1);
}

TEST_CASE("membership on a known sequence", "[sam]") {
  // a b c a b d over ids 0..3
  SuffixAutomaton sam = build_automaton({0, 1, 2, 0, 1, 3});
  CHECK(sam.contains({0, 1}));
  CHECK_FALSE(sam.contains({1, 0}));
  CHECK(sam.contains({2, 0, 1}));
  CHECK(sam.contains({0, 1, 3}));
  CHECK_FALSE(sam.contains({3, 0}));
}

TEST_CASE("state count bound on a run of equal tokens", "[sam]") {
  SuffixAutomaton sam = build_automaton({5, 5, 5, 5});
  CHECK(sam.state_count() <= 2 * 4 - 1);
}

TEST_CASE("recognized language is exactly the substring set", "[sam][property]") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 60; ++iter) {
    int len = 2 + static_cast<int>(rng() % 24);
    int alphabet = 2 + static_cast<int>(rng() % 3);
    TokenSeq s = random_seq(rng, len, alphabet);
    SuffixAutomaton sam = build_automaton(s);

    for (const TokenSeq& sub : all_substrings(s, 8)) CHECK(sam.contains(sub));
    for (int probe = 0; probe < 40; ++probe) {
      TokenSeq p = random_seq(rng, 1 + static_cast<int>(rng() % 6), alphabet);
      CHECK(sam.contains(p) == oracle::contains_substring(s, p));
    }
  }
}

TEST_CASE("linear size bounds", "[sam][property]") {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 80; ++iter) {
    int len = 3 + static_cast<int>(rng() % 62);
    TokenSeq s = random_seq(rng, len, 2 + static_cast<int>(rng() % 7));
    SuffixAutomaton sam = build_automaton(s);
    CHECK(sam.state_count() <= 2 * len - 1);
    CHECK(sam.transition_count() <= 3 * len - 4);
  }
}

TEST_CASE("online extension equals rebuild", "[sam][property]") {
  std::mt19937_64 rng(13);
  for (int iter = 0; iter < 30; ++iter) {
    int len = 2 + static_cast<int>(rng() % 20);
    TokenSeq s = random_seq(rng, len, 3);

    SuffixAutomaton grown = build_automaton(s);
    TokenId extra = static_cast<TokenId>(rng() % 3);
    grown.extend(extra);

    TokenSeq full = s;
    full.push_back(extra);
    SuffixAutomaton rebuilt = build_automaton(full);

    for (const TokenSeq& sub : all_substrings(full, 6)) CHECK(grown.contains(sub));
    for (int probe = 0; probe < 25; ++probe) {
      TokenSeq p = random_seq(rng, 1 + static_cast<int>(rng() % 5), 3);
      CHECK(grown.contains(p) == rebuilt.contains(p));
    }
    CHECK(grown.state_count() == rebuilt.state_count());
  }
}

TEST_CASE("extend from empty", "[sam]") {
  SuffixAutomaton sam;
  sam.extend(7);
  CHECK(sam.contains({7}));
  CHECK_FALSE(sam.contains({7, 7}));
  for (int i = 0; i < 10; ++i) sam.extend(7);
  CHECK(sam.state_count() <= 2 * 11 - 1);
}

TEST_CASE("longest suffix match walk", "[sam]") {
  SuffixAutomaton sam = build_automaton({0, 1, 2, 0, 1, 3});
  auto [state, len] = sam.longest_suffix_match({9, 9, 0, 1});
  CHECK(len == 2);  // suffix [0,1] occurs
  CHECK(sam.state(state).len >= 2);

  auto [s2, l2] = sam.longest_suffix_match({4, 5, 6});
  (void)s2;
  CHECK(l2 == 0);

  auto [s3, l3] = sam.longest_suffix_match({2, 0, 1, 3});
  (void)s3;
  CHECK(l3 == 4);  // the whole query is a substring
}

TEST_CASE("first occurrence endpoint of the full sequence", "[sam][property]") {
  std::mt19937_64 rng(14);
  for (int iter = 0; iter < 40; ++iter) {
    int len = 4 + static_cast<int>(rng() % 30);
    TokenSeq s = random_seq(rng, len, 3);
    SuffixAutomaton sam = build_automaton(s);
    auto [state, mlen] = sam.longest_suffix_match(s);
    CHECK(mlen == len);
    // the full sequence occurs exactly once, ending at the last index
    CHECK(sam.state(state).first_endpos == len - 1);
  }
}
