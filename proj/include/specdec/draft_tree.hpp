#pragma once

#include "specdec/vocab.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

/// Where a draft token came from. Tags are carried for stats and traces only;
/// verification ignores them.
enum class DraftSource { Context, History, Calibrated, Reused };

inline const char* to_string(DraftSource s) {
  switch (s) {
    case DraftSource::Context: return "context";
    case DraftSource::History: return "history";
    case DraftSource::Calibrated: return "calibrated";
    case DraftSource::Reused: return "reused";
  }
  return "?";
}

struct DraftNode {
  TokenId token = -1;
  DraftSource source = DraftSource::Context;
  std::vector<int> children;
};

/// Candidate token tree anchored at the last accepted token. Nodes are stored
/// flat; `roots` is the single root layer.
struct DraftTree {
  std::vector<DraftNode> nodes;
  std::vector<int> roots;

  int size() const { return static_cast<int>(nodes.size()); }
  bool empty() const { return nodes.empty(); }

  int add_root(TokenId token, DraftSource source) {
    nodes.push_back({token, source, {}});
    int id = size() - 1;
    roots.push_back(id);
    return id;
  }

  int add_child(int parent, TokenId token, DraftSource source) {
    if (parent < 0 || parent >= size())
      throw std::invalid_argument("DraftTree: parent index out of range");
    nodes.push_back({token, source, {}});
    int id = size() - 1;
    nodes[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }

  /// Structural check: every node reachable from exactly one parent (or the
  /// root layer), no cycles, indices in range. Throws on malformed input.
  void validate() const {
    std::vector<int> ref_count(nodes.size(), 0);
    auto take = [&](int id) {
      if (id < 0 || id >= size())
        throw std::invalid_argument("DraftTree: node index out of range");
      if (++ref_count[static_cast<std::size_t>(id)] > 1)
        throw std::invalid_argument("DraftTree: node referenced twice (cycle or shared child)");
    };
    for (int r : roots) take(r);
    for (const auto& n : nodes)
      for (int c : n.children) take(c);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (ref_count[i] == 0)
        throw std::invalid_argument("DraftTree: orphan node " + std::to_string(i));
  }

  /// All root-to-leaf token paths, in depth-first child order.
  std::vector<TokenSeq> paths() const {
    std::vector<TokenSeq> out;
    TokenSeq cur;
    for (int r : roots) collect_paths(r, cur, out);
    return out;
  }

private:
  void collect_paths(int id, TokenSeq& cur, std::vector<TokenSeq>& out) const {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    cur.push_back(n.token);
    if (n.children.empty()) {
      out.push_back(cur);
    } else {
      for (int c : n.children) collect_paths(c, cur, out);
    }
    cur.pop_back();
  }
};

/// Builds a single-chain tree from a linear draft.
inline DraftTree chain_tree(const TokenSeq& draft, DraftSource source) {
  DraftTree t;
  int parent = -1;
  for (TokenId tok : draft) {
    parent = (parent < 0) ? t.add_root(tok, source) : t.add_child(parent, tok, source);
  }
  return t;
}

}  // namespace specdec
