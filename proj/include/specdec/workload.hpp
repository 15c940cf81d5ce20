#pragma once

/**
 * Synthetic context-augmented workloads.
 *
 * Each task carries a context document, a prompt (context plus a query
 * token), and a reference continuation that the generated TableLM reproduces
 * exactly under greedy decoding. The reference is cut into spans and each
 * span is planted into the context verbatim, with token substitutions
 * (synonym), with interior deletions (missing), or not at all, according to
 * the spec rates. That gives the context/reference relationship the drafter
 * will be measured against: verbatim spans retrieve cleanly, substituted
 * ones diverge lexically at the swap point while the model's own prefill
 * rows still prefer the reference token, deleted ones leave holes the
 * drafter must crawl over.
 *
 * References use per-task disjoint token pools so the shared rule table
 * never collides across tasks. The model is order-2 (bigram-keyed rules with
 * unigram backstops); a couple of connector tokens repeat inside each
 * reference, which the bigram rules disambiguate exactly while
 * first-occurrence anchoring in downstream consumers cannot. Filler and
 * substitute tokens carry no rules; their rows fall back to uniform.
 */

#include "specdec/table_lm.hpp"
#include "specdec/vocab.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

struct WorkloadSpec {
  std::uint64_t seed = 0;
  int vocab_size = 1024;   // content-token pool shared out across tasks
  int context_len = 192;   // approximate context length, padded with filler
  int target_len = 48;     // reference length per task
  double overlap_rate = 0.6;
  double synonym_rate = 0.0;
  double missing_rate = 0.0;
  std::string task_tag = "summary";
  int n_tasks = 8;

  void validate() const {
    auto in01 = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!in01(overlap_rate) || !in01(synonym_rate) || !in01(missing_rate))
      throw std::invalid_argument("workload: rates must be in [0, 1]");
    if (overlap_rate + synonym_rate + missing_rate > 1.0 + 1e-12)
      throw std::invalid_argument("workload: rates sum above 1");
    if (n_tasks < 1) throw std::invalid_argument("workload: n_tasks must be >= 1");
    if (target_len < 8) throw std::invalid_argument("workload: target_len must be >= 8");
    if (context_len < 16) throw std::invalid_argument("workload: context_len must be >= 16");
    if (task_tag != "summary" && task_tag != "rag" && task_tag != "ui" && task_tag != "tweet")
      throw std::invalid_argument("workload: unknown task_tag '" + task_tag + "'");
    if (vocab_size < n_tasks * target_len)
      throw std::invalid_argument("workload: vocab_size too small for n_tasks x target_len");
  }

  static WorkloadSpec from_json(const nlohmann::json& doc) {
    WorkloadSpec s;
    if (doc.contains("seed")) s.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("vocab_size")) s.vocab_size = doc.at("vocab_size").get<int>();
    if (doc.contains("context_len")) s.context_len = doc.at("context_len").get<int>();
    if (doc.contains("target_len")) s.target_len = doc.at("target_len").get<int>();
    if (doc.contains("overlap_rate")) s.overlap_rate = doc.at("overlap_rate").get<double>();
    if (doc.contains("synonym_rate")) s.synonym_rate = doc.at("synonym_rate").get<double>();
    if (doc.contains("missing_rate")) s.missing_rate = doc.at("missing_rate").get<double>();
    if (doc.contains("task_tag")) s.task_tag = doc.at("task_tag").get<std::string>();
    if (doc.contains("n_tasks")) s.n_tasks = doc.at("n_tasks").get<int>();
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"vocab_size", vocab_size},
            {"context_len", context_len},
            {"target_len", target_len},
            {"overlap_rate", overlap_rate},
            {"synonym_rate", synonym_rate},
            {"missing_rate", missing_rate},
            {"task_tag", task_tag},
            {"n_tasks", n_tasks}};
  }
};

struct Task {
  TokenSeq context;    // planted document
  TokenSeq prompt;     // context + query token; decoding conditions on this
  TokenSeq reference;  // greedy continuation of prompt (excluding eos)
};

struct Workload {
  TableLM lm;
  std::vector<Task> tasks;
};

namespace detail {

inline int rng_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double rng_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace detail

inline Workload generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  constexpr int kFillers = 16;
  constexpr int kSubstitutes = 16;
  Vocab vocab;
  TokenId eos = vocab.add("</s>");
  std::vector<TokenId> fillers, subs;
  for (int i = 0; i < kFillers; ++i) fillers.push_back(vocab.add("f" + std::to_string(i)));
  for (int i = 0; i < kSubstitutes; ++i) subs.push_back(vocab.add("s" + std::to_string(i)));
  std::vector<TokenId> queries;
  for (int k = 0; k < spec.n_tasks; ++k)
    queries.push_back(vocab.add("q" + std::to_string(k)));
  std::vector<TokenId> pool;
  for (int i = 0; i < spec.vocab_size; ++i) pool.push_back(vocab.add("w" + std::to_string(i)));
  std::shuffle(pool.begin(), pool.end(), rng);

  TableLM lm(vocab, 2, eos);
  std::vector<Task> tasks;
  std::size_t pool_next = 0;
  std::set<TokenId> has_backstop;

  for (int k = 0; k < spec.n_tasks; ++k) {
    Task task;
    task.reference.assign(pool.begin() + static_cast<std::ptrdiff_t>(pool_next),
                          pool.begin() + static_cast<std::ptrdiff_t>(pool_next) + spec.target_len);
    pool_next += static_cast<std::size_t>(spec.target_len);

    // a couple of connector tokens repeat later in the reference; kept two
    // apart so every bigram key stays distinct and the chain stays exact
    if (spec.target_len >= 24) {
      std::set<int> touched;
      auto clear_around = [&](int p) {
        return !touched.count(p - 1) && !touched.count(p) && !touched.count(p + 1);
      };
      for (int c = 0; c < 2; ++c) {
        int i = detail::rng_int(rng, 2, spec.target_len / 2 - 2);
        int j = detail::rng_int(rng, spec.target_len / 2 + 2, spec.target_len - 4);
        if (!clear_around(i) || !clear_around(j)) continue;
        touched.insert(i);
        touched.insert(j);
        task.reference[static_cast<std::size_t>(j)] = task.reference[static_cast<std::size_t>(i)];
      }
    }

    // bigram rule chain for query -> r0 -> ... -> eos, with unigram
    // backstops (first successor wins); a quarter of the bigram rows keep a
    // low-probability distractor so calibration sees non-trivial cuts
    auto install = [&](TokenId prev, TokenId cur, TokenId next) {
      if (detail::rng_unit(rng) < 0.25) {
        TokenId d = subs[static_cast<std::size_t>(detail::rng_int(rng, 0, kSubstitutes - 1))];
        lm.set_row({prev, cur}, ProbRow{{next, 0.8}, {d, 0.2}});
      } else {
        lm.set_rule({prev, cur}, next);
      }
      if (!has_backstop.count(cur)) {
        has_backstop.insert(cur);
        lm.set_rule({cur}, next);
      }
    };
    TokenId q = queries[static_cast<std::size_t>(k)];
    lm.set_rule({q}, task.reference.front());
    install(q, task.reference.front(), task.reference[1]);
    for (std::size_t i = 0; i + 2 < task.reference.size(); ++i)
      install(task.reference[i], task.reference[i + 1], task.reference[i + 2]);
    install(task.reference[task.reference.size() - 2], task.reference.back(), eos);

    // cut the reference into spans and plant them
    struct Span { int begin; int len; };
    std::vector<Span> spans;
    int at = 0;
    while (at < spec.target_len) {
      int len = std::min(detail::rng_int(rng, 6, 12), spec.target_len - at);
      if (spec.target_len - (at + len) < 4) len = spec.target_len - at;
      spans.push_back({at, len});
      at += len;
    }

    auto filler_run = [&](TokenSeq& out, int count) {
      for (int i = 0; i < count; ++i)
        out.push_back(fillers[static_cast<std::size_t>(detail::rng_int(rng, 0, kFillers - 1))]);
    };

    filler_run(task.context, detail::rng_int(rng, 1, 3));
    for (const auto& sp : spans) {
      double u = detail::rng_unit(rng);
      TokenSeq planted(task.reference.begin() + sp.begin,
                       task.reference.begin() + sp.begin + sp.len);
      if (u < spec.overlap_rate) {
        // verbatim
      } else if (u < spec.overlap_rate + spec.synonym_rate) {
        int n_sub = sp.len >= 10 ? 2 : 1;
        for (int s = 0; s < n_sub; ++s) {
          int pos = detail::rng_int(rng, 1, sp.len - 2);
          planted[static_cast<std::size_t>(pos)] =
              subs[static_cast<std::size_t>(detail::rng_int(rng, 0, kSubstitutes - 1))];
        }
      } else if (u < spec.overlap_rate + spec.synonym_rate + spec.missing_rate) {
        int del_at = detail::rng_int(rng, 1, sp.len - 2);
        int del_n = std::min(detail::rng_int(rng, 1, 2), sp.len - 1 - del_at);
        planted.erase(planted.begin() + del_at, planted.begin() + del_at + del_n);
      } else {
        continue;  // span absent from the context
      }
      task.context.insert(task.context.end(), planted.begin(), planted.end());
      filler_run(task.context, detail::rng_int(rng, 1, 3));
    }
    while (static_cast<int>(task.context.size()) < spec.context_len) filler_run(task.context, 1);

    task.prompt = task.context;
    task.prompt.push_back(queries[static_cast<std::size_t>(k)]);
    tasks.push_back(std::move(task));
  }

  return Workload{std::move(lm), std::move(tasks)};
}

}  // namespace specdec
