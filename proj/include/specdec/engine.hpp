#pragma once

/**
 * Speculative decoding engine.
 *
 * Each step retrieves a fresh draft tree, extends it with live reuse
 * segments up to the step budget, verifies the tree against the model, and
 * appends the accepted tokens plus the correction. Rejected branches are
 * mined for their longest still-plausible segment (the maximal window where
 * the draft agrees with the model's own continuation of it); such segments
 * are buffered and re-attached as extra branches on later steps until they
 * are consumed or the packing rule drops them. The emitted stream always
 * equals pure greedy decoding.
 */

#include "specdec/draft_store.hpp"
#include "specdec/draft_tree.hpp"
#include "specdec/table_lm.hpp"
#include "specdec/verify.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

// ---------------------------------------------------------------------------
// Draft reuse
// ---------------------------------------------------------------------------

/// Maximal equality window of a rejected draft, as offsets from the rejection
/// index e: the reusable segment is x[e+gamma .. e+epsilon].
struct ReuseWindow {
  int gamma = 0;
  int epsilon = 0;
  int length() const { return epsilon - gamma + 1; }
};

/// Finds the longest run of x[i] == y[i] strictly after the rejection index.
/// y must be the model's predictions over the draft (|y| = |x| + 1, y[i]
/// conditioned on x[0..i-1]). Returns nothing when no post-rejection token
/// agrees (the Redundant case). Ties break toward the smallest gamma.
inline std::optional<ReuseWindow> compute_reuse(const TokenSeq& x, const TokenSeq& y,
                                                int e) {
  int n = static_cast<int>(x.size());
  if (static_cast<int>(y.size()) != n + 1)
    throw std::invalid_argument("compute_reuse: need |y| == |x| + 1");
  if (e < 0 || e >= n) throw std::invalid_argument("compute_reuse: e out of range");
  if (x[static_cast<std::size_t>(e)] == y[static_cast<std::size_t>(e)])
    throw std::invalid_argument("compute_reuse: x[e] must mismatch y[e]");

  std::optional<ReuseWindow> best;
  int i = e + 1;
  while (i < n) {
    if (x[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(i)]) {
      ++i;
      continue;
    }
    int start = i;
    while (i < n && x[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)]) ++i;
    ReuseWindow w{start - e, (i - 1) - e};
    if (!best || w.length() > best->length()) best = w;
  }
  return best;
}

enum class RejectionCase { Missing, Synonym, Redundant };

inline const char* to_string(RejectionCase c) {
  switch (c) {
    case RejectionCase::Missing: return "missing";
    case RejectionCase::Synonym: return "synonym";
    case RejectionCase::Redundant: return "redundant";
  }
  return "?";
}

/// Analytics-only classification of a rejection; never affects output.
/// A segment beginning at x[e] itself means the expected stream merely
/// inserted tokens before a correct draft tail (Missing); a segment starting
/// strictly later means the head was lexically replaced (Synonym); no
/// segment means the whole tail diverged (Redundant).
inline RejectionCase classify_case(const TokenSeq& /*x*/, const TokenSeq& /*y*/,
                                   int /*e*/, const std::optional<ReuseWindow>& reuse) {
  if (!reuse) return RejectionCase::Redundant;
  return reuse->gamma == 0 ? RejectionCase::Missing : RejectionCase::Synonym;
}

// ---------------------------------------------------------------------------
// Engine configuration and stats
// ---------------------------------------------------------------------------

struct ReuseBuffer {
  struct Segment {
    TokenSeq tokens;
    int born_step = 0;
  };
  std::vector<Segment> segments;
  int cumulative_threshold = 64;  // max total draft length per step
  int discarded = 0;              // packing-rule drops, never silent
};

struct EngineConfig {
  int target_draft_len = 32;    // NPU-friendly verification length
  int cumulative_threshold = 64;
  int max_steps = 4096;
  int recent_window = 64;       // output tail length handed to retrieval
  RetrievalConfig retrieval;
  bool enable_drafting = true;  // false: every step is a vanilla greedy step
  bool enable_reuse = true;

  void validate() const {
    if (target_draft_len < 1)
      throw std::invalid_argument("engine: target_draft_len must be >= 1");
    if (cumulative_threshold < 1)
      throw std::invalid_argument("engine: cumulative_threshold must be >= 1");
    if (max_steps < 1) throw std::invalid_argument("engine: max_steps must be >= 1");
    if (recent_window < 1) throw std::invalid_argument("engine: recent_window must be >= 1");
    retrieval.validate();
  }
};

struct CaseCounts {
  int missing = 0;
  int synonym = 0;
  int redundant = 0;
  int total() const { return missing + synonym + redundant; }
};

struct DecodeStats {
  int steps = 0;
  int tokens_out = 0;
  double acceptance_ratio = 0.0;  // tokens_out / steps
  CaseCounts case_counts;
  std::vector<int> per_step_draft_lens;
  bool truncated = false;  // max_steps exhausted before eos
  int reuse_segments_added = 0;
  int reuse_segments_discarded = 0;

  double mean_draft_len() const {
    if (per_step_draft_lens.empty()) return 0.0;
    long long s = 0;
    for (int v : per_step_draft_lens) s += v;
    return static_cast<double>(s) / static_cast<double>(per_step_draft_lens.size());
  }
};

/// Per-step trace record (JSONL export).
struct StepRecord {
  int draft_len = 0;
  int accepted = 0;
  TokenId correction = -1;
  std::optional<RejectionCase> rejection_case;
  bool reuse_active = false;
};

// ---------------------------------------------------------------------------
// Step draft construction
// ---------------------------------------------------------------------------

namespace detail {

/// Copies `src` branch by branch into `dst` until the node budget runs out.
inline void copy_tree_limited(const DraftTree& src, DraftTree& dst, int budget) {
  auto copy_node = [&](auto&& self, int src_id, int dst_parent) -> void {
    if (dst.size() >= budget) return;
    const auto& n = src.nodes[static_cast<std::size_t>(src_id)];
    int id = (dst_parent < 0) ? dst.add_root(n.token, n.source)
                              : dst.add_child(dst_parent, n.token, n.source);
    for (int c : n.children) self(self, c, id);
  };
  for (int r : src.roots) {
    if (dst.size() >= budget) break;
    copy_node(copy_node, r, -1);
  }
}

inline bool has_root_token(const DraftTree& tree, TokenId tok) {
  for (int r : tree.roots)
    if (tree.nodes[static_cast<std::size_t>(r)].token == tok) return true;
  return false;
}

}  // namespace detail

/// Builds one step's draft: fresh retrieval first, then live reuse segments
/// oldest-first as extra root branches. A segment that would push the step
/// total past min(target_draft_len, cumulative_threshold) is discarded from
/// the buffer and counted; a segment whose first token collides with an
/// existing root branch is deferred, not dropped. `attached` (optional)
/// receives (root node id, buffer index) pairs for the segments packed in.
inline DraftTree build_step_draft(const DraftStore& store, ReuseBuffer& reuse,
                                  const TokenSeq& recent, const EngineConfig& cfg,
                                  std::vector<std::pair<int, std::size_t>>* attached = nullptr) {
  DraftTree tree;
  int budget = std::min(cfg.target_draft_len, reuse.cumulative_threshold);
  if (cfg.enable_drafting && !recent.empty()) {
    DraftTree fresh = store.retrieve(recent, cfg.retrieval);
    detail::copy_tree_limited(fresh, tree, budget);
  }
  if (!cfg.enable_reuse) return tree;

  std::size_t i = 0;
  while (i < reuse.segments.size()) {
    const auto& seg = reuse.segments[i];
    if (static_cast<int>(seg.tokens.size()) > budget - tree.size()) {
      reuse.segments.erase(reuse.segments.begin() + static_cast<std::ptrdiff_t>(i));
      ++reuse.discarded;
      continue;
    }
    if (detail::has_root_token(tree, seg.tokens.front())) {
      ++i;  // deferred: same first token already drafted this step
      continue;
    }
    int parent = -1;
    for (TokenId tok : seg.tokens) {
      parent = (parent < 0) ? tree.add_root(tok, DraftSource::Reused)
                            : tree.add_child(parent, tok, DraftSource::Reused);
    }
    if (attached) attached->push_back({tree.roots.back(), i});
    ++i;
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Decode loop
// ---------------------------------------------------------------------------

namespace detail {

/// Mines the rejected part of the step draft for the best reuse segment.
/// Every root-to-leaf path through the accepted prefix is a candidate linear
/// draft; predictions along it are the model's continuation of the draft
/// itself. Returns the winning segment (if any) and the rejection class.
struct ReuseExtraction {
  std::optional<TokenSeq> segment;
  RejectionCase rejection_case = RejectionCase::Redundant;
};

inline ReuseExtraction extract_reuse(const TableLM& lm, const TokenSeq& prefix,
                                     const DraftTree& tree, const VerificationResult& res) {
  ReuseExtraction out;
  if (!res.rejection_pos) return out;

  // walk to the rejection level
  const std::vector<int>* level = &tree.roots;
  for (TokenId tok : res.accepted) {
    int next = -1;
    for (int id : *level) {
      if (tree.nodes[static_cast<std::size_t>(id)].token == tok) {
        next = id;
        break;
      }
    }
    level = &tree.nodes[static_cast<std::size_t>(next)].children;
  }

  int e = res.accepted_count;
  TokenSeq base = prefix;
  base.insert(base.end(), res.accepted.begin(), res.accepted.end());

  std::optional<ReuseWindow> best;
  TokenSeq best_segment;

  TokenSeq branch;  // tokens below the accepted prefix
  auto consider = [&](const TokenSeq& tail) {
    TokenSeq x = res.accepted;
    x.insert(x.end(), tail.begin(), tail.end());
    TokenSeq y(res.accepted.begin(), res.accepted.end());
    y.push_back(res.correction);
    TokenSeq cond = base;
    for (std::size_t i = 0; i + 1 < tail.size(); ++i) {
      cond.push_back(tail[i]);
      y.push_back(greedy_next(lm, cond));
    }
    if (!tail.empty()) {
      cond.push_back(tail.back());
      y.push_back(greedy_next(lm, cond));
    }
    auto w = compute_reuse(x, y, e);
    if (w && (!best || w->length() > best->length() ||
              (w->length() == best->length() && w->gamma < best->gamma))) {
      best = w;
      best_segment.assign(x.begin() + (e + w->gamma), x.begin() + (e + w->epsilon + 1));
    }
  };

  auto dfs = [&](auto&& self, int id) -> void {
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    branch.push_back(n.token);
    if (n.children.empty()) consider(branch);
    else for (int c : n.children) self(self, c);
    branch.pop_back();
  };
  for (int id : *level) dfs(dfs, id);

  if (best) out.segment = std::move(best_segment);
  // x/y of the winning branch are not needed for the class: only the window is
  out.rejection_case = best ? (best->gamma == 0 ? RejectionCase::Missing
                                                : RejectionCase::Synonym)
                            : RejectionCase::Redundant;
  return out;
}

}  // namespace detail

struct DecodeResult {
  TokenSeq output;
  DecodeStats stats;
  std::vector<StepRecord> trace;
};

/// Runs the full speculative loop until eos or max_steps. The store must hold
/// the indexed context (and merged calibration, if enabled); it is extended
/// online with every emitted token.
inline DecodeResult decode(const TableLM& lm, DraftStore& store, const TokenSeq& prompt,
                           const EngineConfig& cfg, bool keep_trace = false) {
  cfg.validate();
  if (prompt.empty()) throw std::invalid_argument("decode: empty prompt");

  DecodeResult result;
  TokenSeq cur = prompt;
  ReuseBuffer buf;
  buf.cumulative_threshold = cfg.cumulative_threshold;
  bool finished = false;

  for (int step = 0; step < cfg.max_steps && !finished; ++step) {
    std::size_t tail = std::min<std::size_t>(cur.size(),
                                             static_cast<std::size_t>(cfg.recent_window));
    TokenSeq recent(cur.end() - static_cast<std::ptrdiff_t>(tail), cur.end());

    std::vector<std::pair<int, std::size_t>> attached;
    DraftTree tree = build_step_draft(store, buf, recent, cfg, &attached);
    VerificationResult res = verify_tree(lm, cur, tree);

    TokenSeq new_tokens = res.accepted;
    new_tokens.push_back(res.correction);
    for (std::size_t i = 0; i < new_tokens.size(); ++i) {
      if (new_tokens[i] == lm.eos()) {
        new_tokens.resize(i + 1);
        finished = true;
        break;
      }
    }

    StepRecord rec;
    rec.draft_len = tree.size();
    rec.accepted = res.accepted_count;
    rec.correction = res.correction;
    rec.reuse_active = !attached.empty();

    std::optional<detail::ReuseExtraction> ext;
    if (res.rejection_pos) {
      ext = detail::extract_reuse(lm, cur, tree, res);
      rec.rejection_case = ext->rejection_case;
      switch (ext->rejection_case) {
        case RejectionCase::Missing: ++result.stats.case_counts.missing; break;
        case RejectionCase::Synonym: ++result.stats.case_counts.synonym; break;
        case RejectionCase::Redundant: ++result.stats.case_counts.redundant; break;
      }
    }
    if (cfg.enable_reuse) {
      // a segment whose branch the accepted path entered is consumed
      std::optional<std::size_t> consumed;
      if (res.accepted_count > 0) {
        for (const auto& [root_id, seg_idx] : attached) {
          if (tree.nodes[static_cast<std::size_t>(root_id)].token == res.accepted.front()) {
            consumed = seg_idx;
            break;
          }
        }
      }
      if (consumed)
        buf.segments.erase(buf.segments.begin() + static_cast<std::ptrdiff_t>(*consumed));
      if (ext && ext->segment && !finished) {
        buf.segments.push_back({*ext->segment, step});
        ++result.stats.reuse_segments_added;
      }
    }

    for (TokenId t : new_tokens) {
      cur.push_back(t);
      store.extend_context(t);
      result.output.push_back(t);
    }

    ++result.stats.steps;
    result.stats.tokens_out += static_cast<int>(new_tokens.size());
    result.stats.per_step_draft_lens.push_back(tree.size());
    if (keep_trace) result.trace.push_back(rec);
  }

  result.stats.truncated = !finished;
  result.stats.reuse_segments_discarded = buf.discarded;
  result.stats.acceptance_ratio =
      result.stats.steps > 0
          ? static_cast<double>(result.stats.tokens_out) / result.stats.steps
          : 0.0;
  return result;
}

}  // namespace specdec
