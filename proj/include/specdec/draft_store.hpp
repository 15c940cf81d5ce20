#pragma once

/**
 * Draft store: the drafter's database.
 *
 * Holds three retrieval sources. A calibrated token tree (when merged) takes
 * priority, then the suffix automaton over the augmented context, then the
 * automaton over past responses. retrieve() finds the longest suffix of the
 * recent output inside a source and emits continuations as a DraftTree;
 * within a source, continuations of the same longest match are merged and
 * deduplicated by first token. Single writer, concurrent readers between
 * writes.
 */

#include "specdec/calibration.hpp"
#include "specdec/draft_tree.hpp"
#include "specdec/suffix_automaton.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

struct RetrievalConfig {
  int match_len_min = 1;
  int max_branch = 4;
  int max_continuation = 16;

  void validate() const {
    if (match_len_min < 1) throw std::invalid_argument("retrieval: match_len_min must be >= 1");
    if (max_branch < 1) throw std::invalid_argument("retrieval: max_branch must be >= 1");
    if (max_continuation < 1)
      throw std::invalid_argument("retrieval: max_continuation must be >= 1");
  }
};

class DraftStore {
public:
  // Response separator in the history index; never drafted, never matched by
  // vocabulary tokens.
  static constexpr TokenId kHistorySep = -2;

  explicit DraftStore(RetrievalConfig cfg = {}) : config_(cfg) { cfg.validate(); }

  void index_context(const TokenSeq& context) {
    for (TokenId t : context) context_index_.extend(t);
  }

  /// Online extension with freshly accepted tokens.
  void extend_context(TokenId token) { context_index_.extend(token); }

  void add_history(const TokenSeq& response) {
    if (response.empty()) throw std::invalid_argument("add_history: empty response");
    if (!history_index_.source().empty()) history_index_.extend(kHistorySep);
    for (TokenId t : response) history_index_.extend(t);
  }

  void set_calibrated(CalibratedTree tree) { calibrated_ = std::move(tree); }
  void clear_calibrated() { calibrated_.reset(); }

  const SuffixAutomaton& context_index() const { return context_index_; }
  const SuffixAutomaton& history_index() const { return history_index_; }
  const std::optional<CalibratedTree>& calibrated() const { return calibrated_; }
  const RetrievalConfig& config() const { return config_; }

  DraftTree retrieve(const TokenSeq& recent) const { return retrieve(recent, config_); }

  DraftTree retrieve(const TokenSeq& recent, const RetrievalConfig& limits) const {
    limits.validate();
    if (recent.empty()) throw std::invalid_argument("retrieve: recent must be non-empty");
    if (calibrated_ && !calibrated_->empty()) {
      DraftTree t = retrieve_calibrated(recent, limits);
      if (!t.empty()) return t;
    }
    DraftTree t = retrieve_automaton(context_index_, recent, limits, DraftSource::Context);
    if (!t.empty()) return t;
    return retrieve_automaton(history_index_, recent, limits, DraftSource::History);
  }

  /// History persistence: one JSON token-string array per line.
  void save_history(const std::string& path, const Vocab& vocab) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_history: cannot open " + path);
    TokenSeq cur;
    for (TokenId t : history_index_.source()) {
      if (t == kHistorySep) {
        out << response_json(cur, vocab) << "\n";
        cur.clear();
      } else {
        cur.push_back(t);
      }
    }
    if (!cur.empty()) out << response_json(cur, vocab) << "\n";
  }

  void load_history(const std::string& path, const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_history: cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json doc = nlohmann::json::parse(line);
      TokenSeq response;
      for (const auto& t : doc) response.push_back(vocab.id(t.get<std::string>()));
      if (!response.empty()) add_history(response);
    }
  }

private:
  static std::string response_json(const TokenSeq& seq, const Vocab& vocab) {
    nlohmann::json arr = nlohmann::json::array();
    for (TokenId t : seq) arr.push_back(vocab.str(t));
    return arr.dump();
  }

  static bool has_follower(const SuffixAutomaton& sam, int state) {
    for (const auto& [tok, child] : sam.state(state).next) {
      (void)child;
      if (tok != kHistorySep) return true;
    }
    return false;
  }

  static DraftTree retrieve_automaton(const SuffixAutomaton& sam, const TokenSeq& recent,
                                      const RetrievalConfig& limits, DraftSource tag) {
    DraftTree tree;
    auto [state, len] = sam.longest_suffix_match(recent);
    // the index holds the live sequence itself, so the longest match may be
    // the degenerate tail with nothing after it; back off along suffix links
    // to the longest suffix that actually has a continuation
    while (len >= limits.match_len_min && !has_follower(sam, state)) {
      state = sam.state(state).link;
      if (state < 0) {
        len = 0;
        break;
      }
      len = sam.state(state).len;
    }
    if (len < limits.match_len_min) return tree;
    const TokenSeq& src = sam.source();
    int branches = 0;
    for (const auto& [tok, child] : sam.state(state).next) {
      if (tok == kHistorySep) continue;
      if (branches == limits.max_branch) break;
      ++branches;
      int parent = tree.add_root(tok, tag);
      // continuation after the first occurrence of match+tok
      int pos = sam.state(child).first_endpos + 1;
      for (int n = 1; n < limits.max_continuation &&
                      pos < static_cast<int>(src.size()); ++n, ++pos) {
        if (src[static_cast<std::size_t>(pos)] == kHistorySep) break;
        parent = tree.add_child(parent, src[static_cast<std::size_t>(pos)], tag);
      }
    }
    return tree;
  }

  DraftTree retrieve_calibrated(const TokenSeq& recent, const RetrievalConfig& limits) const {
    const CalibratedTree& cal = *calibrated_;
    int max_len = std::min<int>(static_cast<int>(recent.size()), cal.max_path_len);
    for (int len = max_len; len >= std::max(1, limits.match_len_min); --len) {
      TokenSeq suffix(recent.end() - len, recent.end());
      auto it = cal.roots_by_token.find(suffix[0]);
      if (it == cal.roots_by_token.end()) continue;
      for (int root : it->second) {
        int node = root;
        bool ok = true;
        for (int i = 1; i < len && ok; ++i) {
          int next = -1;
          for (int c : cal.nodes[static_cast<std::size_t>(node)].children) {
            if (cal.nodes[static_cast<std::size_t>(c)].token == suffix[static_cast<std::size_t>(i)]) {
              next = c;
              break;
            }
          }
          if (next < 0) ok = false;
          else node = next;
        }
        if (!ok || cal.nodes[static_cast<std::size_t>(node)].children.empty()) continue;
        DraftTree t = emit_calibrated_subtree(cal, node, limits);
        if (!t.empty()) return t;
      }
    }
    return {};
  }

  /// Turns the subtree under `node` into a DraftTree: up to max_branch
  /// root-to-leaf paths in stored (probability) order, each truncated to
  /// max_continuation, re-merged by shared prefix.
  static DraftTree emit_calibrated_subtree(const CalibratedTree& cal, int node,
                                           const RetrievalConfig& limits) {
    std::vector<TokenSeq> paths;
    TokenSeq cur;
    auto dfs = [&](auto&& self, int id) -> void {
      if (static_cast<int>(paths.size()) >= limits.max_branch) return;
      const auto& n = cal.nodes[static_cast<std::size_t>(id)];
      cur.push_back(n.token);
      if (n.children.empty() || static_cast<int>(cur.size()) >= limits.max_continuation) {
        paths.push_back(cur);
      } else {
        for (int c : n.children) self(self, c);
      }
      cur.pop_back();
    };
    for (int c : cal.nodes[static_cast<std::size_t>(node)].children) {
      if (static_cast<int>(paths.size()) >= limits.max_branch) break;
      dfs(dfs, c);
    }

    DraftTree tree;
    for (const auto& p : paths) {
      int parent = -1;
      for (TokenId tok : p) {
        const std::vector<int>& level = (parent < 0)
            ? tree.roots
            : tree.nodes[static_cast<std::size_t>(parent)].children;
        int found = -1;
        for (int id : level) {
          if (tree.nodes[static_cast<std::size_t>(id)].token == tok) {
            found = id;
            break;
          }
        }
        if (found >= 0) parent = found;
        else parent = (parent < 0) ? tree.add_root(tok, DraftSource::Calibrated)
                                   : tree.add_child(parent, tok, DraftSource::Calibrated);
      }
    }
    return tree;
  }

  SuffixAutomaton context_index_;
  SuffixAutomaton history_index_;
  std::optional<CalibratedTree> calibrated_;
  RetrievalConfig config_;
};

inline void merge_into_store(DraftStore& store, CalibratedTree tree) {
  store.set_calibrated(std::move(tree));
}

inline DraftTree retrieve(const DraftStore& store, const TokenSeq& recent,
                          const RetrievalConfig& limits) {
  return store.retrieve(recent, limits);
}

inline void add_history(DraftStore& store, const TokenSeq& response) {
  store.add_history(response);
}

}  // namespace specdec
