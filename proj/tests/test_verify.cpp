#include "specdec/verify.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

using namespace specdec;

namespace {

// order-2 model over a small alphabet built from a seeded random corpus
TableLM random_lm(std::uint64_t seed, int alphabet = 4, int corpus_len = 60) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> doc;
  for (int i = 0; i < corpus_len; ++i)
    doc.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
  return TableLM::from_corpus({doc}, 2);
}

TableLM chain_lm() {
  Vocab v(std::vector<std::string>{"</s>", "A", "B", "C"});
  TableLM lm(v, 1, 0);
  lm.set_rule({v.id("A")}, v.id("B"));
  lm.set_rule({v.id("B")}, v.id("C"));
  lm.set_rule({v.id("C")}, v.id("</s>"));
  return lm;
}

}  // namespace

TEST_CASE("empty draft degenerates to one greedy step", "[verify]") {
  TableLM lm = chain_lm();
  VerificationResult res = verify_linear(lm, {lm.vocab().id("A")}, {});
  CHECK(res.accepted.empty());
  CHECK(res.accepted_count == 0);
  CHECK(res.correction == lm.vocab().id("B"));
  CHECK_FALSE(res.rejection_pos.has_value());
}

TEST_CASE("full acceptance yields the bonus token", "[verify]") {
  TableLM lm = chain_lm();
  TokenId A = lm.vocab().id("A"), B = lm.vocab().id("B"), C = lm.vocab().id("C");
  VerificationResult res = verify_linear(lm, {A}, {B, C});
  CHECK(res.accepted == TokenSeq{B, C});
  CHECK(res.correction == lm.vocab().id("</s>"));
  CHECK_FALSE(res.rejection_pos.has_value());
}

TEST_CASE("first mismatch rejects the tail", "[verify]") {
  TableLM lm = chain_lm();
  TokenId A = lm.vocab().id("A"), B = lm.vocab().id("B"), C = lm.vocab().id("C");
  VerificationResult res = verify_linear(lm, {A}, {C, C});
  CHECK(res.accepted.empty());
  CHECK(res.correction == B);
  REQUIRE(res.rejection_pos.has_value());
  CHECK(*res.rejection_pos == 0);
}

TEST_CASE("predictions are conditioned on the draft itself", "[verify]") {
  TableLM lm = chain_lm();
  TokenId A = lm.vocab().id("A"), B = lm.vocab().id("B"), C = lm.vocab().id("C");
  TokenSeq y;
  verify_linear(lm, {A}, {C, B}, &y);
  REQUIRE(y.size() == 3);
  CHECK(y[0] == B);              // after [A]
  CHECK(y[1] == lm.vocab().id("</s>"));  // after [A, C]: rule C -> eos
  CHECK(y[2] == C);              // after [A, C, B]: rule B -> C
}

TEST_CASE("a chain tree verifies like the linear draft", "[verify]") {
  TableLM lm = random_lm(7);
  TokenSeq prefix = lm.vocab().encode({"a", "b"});
  TokenSeq draft = lm.vocab().encode({"a", "c", "b"});
  VerificationResult lin = verify_linear(lm, prefix, draft);
  VerificationResult tre = verify_tree(lm, prefix, chain_tree(draft, DraftSource::Context));
  CHECK(lin.accepted == tre.accepted);
  CHECK(lin.correction == tre.correction);
  CHECK(lin.rejection_pos == tre.rejection_pos);
}

TEST_CASE("tree verification follows the greedy branch", "[verify]") {
  TableLM lm = chain_lm();
  TokenId A = lm.vocab().id("A"), B = lm.vocab().id("B"), C = lm.vocab().id("C");
  DraftTree tree;
  int b = tree.add_root(B, DraftSource::Context);
  tree.add_root(C, DraftSource::Context);      // wrong branch, discarded
  tree.add_child(b, C, DraftSource::Context);  // correct continuation
  VerificationResult res = verify_tree(lm, {A}, tree);
  CHECK(res.accepted == TokenSeq{B, C});
  CHECK(res.correction == lm.vocab().id("</s>"));
}

TEST_CASE("malformed trees are rejected", "[verify]") {
  TableLM lm = chain_lm();
  DraftTree shared;
  int r = shared.add_root(lm.vocab().id("B"), DraftSource::Context);
  int c = shared.add_child(r, lm.vocab().id("C"), DraftSource::Context);
  shared.nodes[static_cast<std::size_t>(c)].children.push_back(r);  // cycle
  CHECK_THROWS_AS(verify_tree(lm, {lm.vocab().id("A")}, shared), std::invalid_argument);

  DraftTree orphan;
  orphan.nodes.push_back({lm.vocab().id("B"), DraftSource::Context, {}});
  CHECK_THROWS_AS(verify_tree(lm, {lm.vocab().id("A")}, orphan), std::invalid_argument);
}

TEST_CASE("random trees match the exhaustive path oracle", "[verify][property]") {
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 300; ++iter) {
    TableLM lm = random_lm(rng());
    const Vocab& v = lm.vocab();
    std::vector<TokenId> alphabet;
    for (int i = 0; i < v.size(); ++i) alphabet.push_back(i);

    TokenSeq prefix{alphabet[rng() % alphabet.size()]};
    DraftTree tree;
    int n_roots = 1 + static_cast<int>(rng() % 3);
    std::vector<int> frontier;
    std::set<TokenId> seen_roots;
    for (int r = 0; r < n_roots; ++r) {
      TokenId t = alphabet[rng() % alphabet.size()];
      if (seen_roots.count(t)) continue;  // sibling tokens stay distinct
      seen_roots.insert(t);
      frontier.push_back(tree.add_root(t, DraftSource::Context));
    }
    for (int grow = 0; grow < 6 && !frontier.empty(); ++grow) {
      int parent = frontier[rng() % frontier.size()];
      std::set<TokenId> sibling;
      for (int c : tree.nodes[static_cast<std::size_t>(parent)].children)
        sibling.insert(tree.nodes[static_cast<std::size_t>(c)].token);
      TokenId t = alphabet[rng() % alphabet.size()];
      if (sibling.count(t)) continue;
      frontier.push_back(tree.add_child(parent, t, DraftSource::Context));
    }

    VerificationResult tre = verify_tree(lm, prefix, tree);

    // oracle: run verify_linear over every root-to-leaf path; the result is
    // the unique greedy-consistent one (max accepted count)
    VerificationResult best = verify_linear(lm, prefix, {});
    for (const TokenSeq& path : tree.paths()) {
      VerificationResult lin = verify_linear(lm, prefix, path);
      if (lin.accepted_count > best.accepted_count) best = lin;
    }
    CHECK(tre.accepted == best.accepted);
    CHECK(tre.correction == best.correction);
    CHECK(tre.accepted_count == best.accepted_count);
  }
}
