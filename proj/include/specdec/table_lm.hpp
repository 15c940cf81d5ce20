#pragma once

/**
 * Table-driven next-token model.
 *
 * A TableLM maps token contexts of length <= order to probability rows over
 * the vocabulary. Lookup is total: it backs off from the longest stored
 * suffix of the conditioning prefix down to the empty context, then falls
 * back to a uniform row. Argmax ties break toward the lowest token index,
 * so greedy prediction is fully deterministic. Immutable after construction
 * and safe to share across threads.
 */

#include "specdec/vocab.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

/// Sparse probability row over the vocabulary; absent tokens have mass 0.
using ProbRow = std::map<TokenId, double>;

inline double row_sum(const ProbRow& row) {
  double s = 0.0;
  for (const auto& [t, p] : row) s += p;
  return s;
}

/// Argmax with ties broken by lowest token index. A uniform row (empty map
/// with uniform flag) resolves to token 0 by the same rule.
inline TokenId row_argmax(const ProbRow& row) {
  if (row.empty()) throw std::logic_error("row_argmax: empty row");
  TokenId best = row.begin()->first;
  double best_p = row.begin()->second;
  for (const auto& [t, p] : row) {
    if (p > best_p) {
      best = t;
      best_p = p;
    }
  }
  return best;
}

class TableLM {
public:
  TableLM(Vocab vocab, int order, TokenId eos)
      : vocab_(std::move(vocab)), order_(order), eos_(eos) {
    if (order_ < 1) throw std::invalid_argument("TableLM: order must be >= 1");
    if (vocab_.size() < 2)
      throw std::invalid_argument("TableLM: vocab must hold at least 2 tokens");
    if (!vocab_.contains(eos_))
      throw std::invalid_argument("TableLM: eos id not in vocab");
  }

  /// Install a rule row for an exact context (length <= order). The row must
  /// sum to 1 within 1e-9.
  void set_row(const TokenSeq& context, ProbRow row) {
    if (static_cast<int>(context.size()) > order_)
      throw std::invalid_argument("TableLM: context longer than order");
    for (TokenId t : context) check_token(t);
    if (row.empty()) throw std::invalid_argument("TableLM: empty probability row");
    for (const auto& [t, p] : row) {
      check_token(t);
      if (p < 0.0) throw std::invalid_argument("TableLM: negative probability");
    }
    if (std::abs(row_sum(row) - 1.0) > 1e-9)
      throw std::invalid_argument("TableLM: row does not sum to 1");
    table_[context] = std::move(row);
  }

  /// Deterministic single-successor rule.
  void set_rule(const TokenSeq& context, TokenId next) {
    set_row(context, ProbRow{{next, 1.0}});
  }

  /// Conditioned distribution for the token following `prefix`; backs off from
  /// the longest stored suffix, then returns the uniform row.
  ProbRow row(const TokenSeq& prefix) const {
    for (TokenId t : prefix) check_token(t);
    int max_len = std::min<int>(order_, static_cast<int>(prefix.size()));
    for (int len = max_len; len >= 0; --len) {
      TokenSeq key(prefix.end() - len, prefix.end());
      auto it = table_.find(key);
      if (it != table_.end()) return it->second;
    }
    return uniform_row();
  }

  ProbRow uniform_row() const {
    ProbRow row;
    double p = 1.0 / static_cast<double>(vocab_.size());
    for (TokenId t = 0; t < vocab_.size(); ++t) row[t] = p;
    return row;
  }

  const Vocab& vocab() const { return vocab_; }
  int order() const { return order_; }
  TokenId eos() const { return eos_; }
  std::size_t rule_count() const { return table_.size(); }

  /// Builds an order-k count model from whitespace-tokenized documents. Every
  /// suffix length 1..k is counted so backoff hits shorter contexts.
  static TableLM from_corpus(const std::vector<std::vector<std::string>>& docs,
                             int order, const std::string& eos_token = "</s>") {
    Vocab vocab;
    TokenId eos = vocab.add(eos_token);
    std::vector<TokenSeq> seqs;
    for (const auto& doc : docs) {
      TokenSeq seq;
      for (const auto& w : doc) seq.push_back(vocab.add(w));
      seqs.push_back(std::move(seq));
    }
    if (vocab.size() < 2) vocab.add("<unk>");
    TableLM lm(vocab, order, eos);
    std::map<TokenSeq, std::map<TokenId, std::int64_t>> counts;
    for (const auto& seq : seqs) {
      for (std::size_t i = 0; i + 1 <= seq.size(); ++i) {
        TokenId next = (i + 1 < seq.size()) ? seq[i + 1] : eos;
        for (int len = 1; len <= order && len <= static_cast<int>(i) + 1; ++len) {
          TokenSeq key(seq.begin() + (i + 1 - len), seq.begin() + (i + 1));
          counts[key][next]++;
        }
      }
    }
    for (const auto& [key, nexts] : counts) {
      std::int64_t total = 0;
      for (const auto& [t, c] : nexts) total += c;
      ProbRow row;
      for (const auto& [t, c] : nexts)
        row[t] = static_cast<double>(c) / static_cast<double>(total);
      lm.set_row(key, std::move(row));
    }
    return lm;
  }

  /// JSON document: {order, eos, entries: [{context: [tokens], probs: {token: p}}]}.
  /// The vocabulary is derived from the document: all mentioned token strings,
  /// lexicographically sorted.
  static TableLM from_json(const nlohmann::json& doc) {
    if (!doc.contains("order") || !doc.contains("eos") || !doc.contains("entries"))
      throw std::invalid_argument("TableLM json: need order, eos, entries");
    int order = doc.at("order").get<int>();
    std::string eos_token = doc.at("eos").get<std::string>();
    std::vector<std::string> names{eos_token};
    for (const auto& e : doc.at("entries")) {
      for (const auto& t : e.at("context"))
        names.push_back(t.get<std::string>());
      for (auto it = e.at("probs").begin(); it != e.at("probs").end(); ++it)
        names.push_back(it.key());
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    Vocab vocab(names);
    if (vocab.size() < 2) vocab.add("<unk>");
    TableLM lm(vocab, order, vocab.id(eos_token));
    for (const auto& e : doc.at("entries")) {
      TokenSeq context;
      for (const auto& t : e.at("context"))
        context.push_back(lm.vocab().id(t.get<std::string>()));
      ProbRow row;
      for (auto it = e.at("probs").begin(); it != e.at("probs").end(); ++it)
        row[lm.vocab().id(it.key())] = it.value().get<double>();
      lm.set_row(context, std::move(row));
    }
    return lm;
  }

  static TableLM from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("TableLM: cannot open " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc);
  }

  nlohmann::json to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [ctx, row] : table_) {
      nlohmann::json probs = nlohmann::json::object();
      for (const auto& [t, p] : row) probs[vocab_.str(t)] = p;
      nlohmann::json ctx_j = nlohmann::json::array();
      for (TokenId t : ctx) ctx_j.push_back(vocab_.str(t));
      entries.push_back({{"context", ctx_j}, {"probs", probs}});
    }
    return {{"order", order_}, {"eos", vocab_.str(eos_)}, {"entries", entries}};
  }

private:
  void check_token(TokenId t) const {
    if (!vocab_.contains(t))
      throw std::invalid_argument("TableLM: token id out of vocab: " + std::to_string(t));
  }

  Vocab vocab_;
  int order_;
  TokenId eos_;
  std::map<TokenSeq, ProbRow> table_;
};

/// Per-position next-token distributions for an input sequence; row t is the
/// distribution of token t+1 conditioned on tokens[0..t].
struct LogitMatrix {
  std::vector<ProbRow> rows;

  std::size_t size() const { return rows.size(); }
};

inline LogitMatrix prefill(const TableLM& lm, const TokenSeq& tokens) {
  if (tokens.empty()) throw std::invalid_argument("prefill: empty input");
  LogitMatrix out;
  out.rows.reserve(tokens.size());
  TokenSeq prefix;
  prefix.reserve(tokens.size());
  for (TokenId t : tokens) {
    prefix.push_back(t);
    out.rows.push_back(lm.row(prefix));
  }
  return out;
}

inline TokenId greedy_next(const TableLM& lm, const TokenSeq& prefix) {
  if (prefix.empty()) throw std::invalid_argument("greedy_next: empty prefix");
  return row_argmax(lm.row(prefix));
}

/// Reference decoder: repeated greedy_next until eos or max_tokens.
inline TokenSeq greedy_decode(const TableLM& lm, const TokenSeq& prompt,
                              int max_tokens) {
  TokenSeq cur = prompt;
  TokenSeq out;
  for (int i = 0; i < max_tokens; ++i) {
    TokenId t = greedy_next(lm, cur);
    out.push_back(t);
    cur.push_back(t);
    if (t == lm.eos()) break;
  }
  return out;
}

}  // namespace specdec
