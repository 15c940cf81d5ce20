#pragma once

/**
 * In-context distribution calibration.
 *
 * After prefill, every context position already carries the model's
 * next-token distribution. calibrate() turns those rows into a token tree:
 * for each anchor position the high-probability successors are sampled
 * (Sample step), each sampled token is located back in the context and its
 * row expanded recursively (Search step), bounded by depth and a global node
 * budget. The resulting tree is a model-aligned draft source that bridges
 * lexical gaps between the context text and what the model actually prefers.
 */

#include "specdec/table_lm.hpp"
#include "specdec/vocab.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace specdec {

struct CalibrationConfig {
  int top_k = 3;          // max sampled successors per node
  double prob_min = 0.05; // probability floor for sampling
  int max_depth = 16;     // sampled-node depth cap (children of anchors are depth 1)
  int max_nodes = 4096;   // global budget on sampled nodes

  void validate() const {
    if (top_k < 1) throw std::invalid_argument("calibration: top_k must be >= 1");
    if (!(prob_min > 0.0 && prob_min <= 1.0))
      throw std::invalid_argument("calibration: prob_min must be in (0, 1]");
    if (max_depth < 1) throw std::invalid_argument("calibration: max_depth must be >= 1");
    if (max_nodes < top_k)
      throw std::invalid_argument("calibration: max_nodes must be >= top_k");
  }
};

struct CalibratedNode {
  TokenId token = -1;
  double prob = 1.0;  // probability in the prefill row it was sampled from
  std::vector<int> children;
};

/// Anchor-rooted token tree over the model distribution. Roots are context
/// token occurrences that contributed at least one sampled child.
struct CalibratedTree {
  std::vector<CalibratedNode> nodes;
  std::vector<int> roots;
  std::vector<int> root_positions;  // context position of each root
  std::map<TokenId, std::vector<int>> roots_by_token;
  int sampled_count = 0;  // node count excluding anchor roots
  int max_path_len = 0;   // nodes on the longest root-to-leaf path

  bool empty() const { return roots.empty(); }

  nlohmann::json to_json(const Vocab& vocab) const {
    nlohmann::json out = nlohmann::json::array();
    for (int r : roots) out.push_back(node_json(r, vocab));
    return out;
  }

private:
  nlohmann::json node_json(int id, const Vocab& vocab) const {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    nlohmann::json children = nlohmann::json::array();
    for (int c : n.children) children.push_back(node_json(c, vocab));
    return {{"token", vocab.str(n.token)}, {"prob", n.prob}, {"children", children}};
  }
};

namespace detail {

/// Row cut used by the Sample step: tokens with prob >= prob_min, ordered by
/// descending probability then ascending token id, truncated to top_k.
inline std::vector<std::pair<TokenId, double>> sample_cut(const ProbRow& row,
                                                          const CalibrationConfig& cfg) {
  std::vector<std::pair<TokenId, double>> cut;
  for (const auto& [t, p] : row)
    if (p >= cfg.prob_min) cut.push_back({t, p});
  std::sort(cut.begin(), cut.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(cut.size()) > cfg.top_k) cut.resize(static_cast<std::size_t>(cfg.top_k));
  return cut;
}

}  // namespace detail

/// Builds the calibrated token tree from prefill logits. Pure function; the
/// Search step anchors on the first occurrence of a sampled token.
inline CalibratedTree calibrate(const TokenSeq& context, const LogitMatrix& logits,
                                const CalibrationConfig& cfg) {
  cfg.validate();
  if (logits.rows.size() != context.size())
    throw std::invalid_argument("calibrate: logits row count != context length");

  std::map<TokenId, int> first_occurrence;
  for (int i = static_cast<int>(context.size()) - 1; i >= 0; --i)
    first_occurrence[context[static_cast<std::size_t>(i)]] = i;

  CalibratedTree tree;

  // Depth-first expansion of one node from the row at context position `pos`.
  auto expand = [&](auto&& self, int node_id, int pos, int depth) -> void {
    if (depth > cfg.max_depth) return;
    auto cut = detail::sample_cut(logits.rows[static_cast<std::size_t>(pos)], cfg);
    for (const auto& [tok, prob] : cut) {
      if (tree.sampled_count >= cfg.max_nodes) return;
      tree.nodes.push_back({tok, prob, {}});
      int child = static_cast<int>(tree.nodes.size()) - 1;
      tree.nodes[static_cast<std::size_t>(node_id)].children.push_back(child);
      ++tree.sampled_count;
      auto occ = first_occurrence.find(tok);
      if (occ != first_occurrence.end() && depth + 1 <= cfg.max_depth)
        self(self, child, occ->second, depth + 1);
    }
  };

  for (std::size_t pos = 0; pos < context.size(); ++pos) {
    if (tree.sampled_count >= cfg.max_nodes) break;
    tree.nodes.push_back({context[pos], 1.0, {}});
    int root = static_cast<int>(tree.nodes.size()) - 1;
    expand(expand, root, static_cast<int>(pos), 1);
    if (tree.nodes[static_cast<std::size_t>(root)].children.empty()) {
      tree.nodes.pop_back();  // anchor contributed nothing
    } else {
      tree.roots.push_back(root);
      tree.root_positions.push_back(static_cast<int>(pos));
      tree.roots_by_token[context[pos]].push_back(root);
    }
  }

  auto depth_of = [&](auto&& self, int id) -> int {
    int d = 1;
    for (int c : tree.nodes[static_cast<std::size_t>(id)].children)
      d = std::max(d, 1 + self(self, c));
    return d;
  };
  for (int r : tree.roots) tree.max_path_len = std::max(tree.max_path_len, depth_of(depth_of, r));
  return tree;
}

}  // namespace specdec
