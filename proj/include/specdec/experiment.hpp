#pragma once

/**
 * Experiment orchestration: runs a variant matrix over a generated workload
 * and emits a reproducible report. Reports carry no timestamps; identical
 * config and seed give byte-identical output. Every variant's output is
 * checked against the greedy reference, so a losslessness violation anywhere
 * in the matrix aborts the run.
 */

#include "specdec/calibration.hpp"
#include "specdec/cost_model.hpp"
#include "specdec/draft_store.hpp"
#include "specdec/engine.hpp"
#include "specdec/metrics.hpp"
#include "specdec/table_lm.hpp"
#include "specdec/workload.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

inline constexpr const char* kSpecdecVersion = "0.1.0";

struct Variant {
  std::string name;
  bool drafting = false;
  bool calibration = false;
  bool reuse = false;
};

/// "vanilla", or "plain" with optional "+calibration" / "+reuse" suffixes.
inline Variant parse_variant(const std::string& name) {
  Variant v;
  v.name = name;
  std::vector<std::string> parts;
  std::string cur;
  for (char c : name) {
    if (c == '+') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.empty() || (parts[0] != "vanilla" && parts[0] != "plain"))
    throw std::invalid_argument("variant '" + name + "': base must be vanilla or plain");
  v.drafting = parts[0] == "plain";
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "calibration") v.calibration = true;
    else if (parts[i] == "reuse") v.reuse = true;
    else throw std::invalid_argument("variant '" + name + "': unknown flag '" + parts[i] + "'");
  }
  if (!v.drafting && (v.calibration || v.reuse))
    throw std::invalid_argument("variant '" + name + "': vanilla takes no flags");
  return v;
}

struct ExperimentConfig {
  WorkloadSpec workload;
  CostModel cost = CostModel::default_model();
  EngineConfig engine;
  CalibrationConfig calibration;
  std::vector<std::string> variants{"vanilla", "plain", "plain+calibration",
                                    "plain+calibration+reuse"};

  void validate() const {
    workload.validate();
    cost.validate();
    engine.validate();
    calibration.validate();
    if (variants.empty()) throw std::invalid_argument("config: no variants");
    for (const auto& v : variants) parse_variant(v);
  }

  static ExperimentConfig from_json(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const std::string& key = it.key();
      if (key != "workload" && key != "cost_model" && key != "variants" &&
          key != "engine" && key != "calibration")
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    if (doc.contains("workload")) cfg.workload = WorkloadSpec::from_json(doc.at("workload"));
    if (doc.contains("cost_model")) cfg.cost = CostModel::from_json(doc.at("cost_model"));
    if (doc.contains("variants"))
      cfg.variants = doc.at("variants").get<std::vector<std::string>>();
    if (doc.contains("engine")) {
      const auto& e = doc.at("engine");
      if (e.contains("target_draft_len"))
        cfg.engine.target_draft_len = e.at("target_draft_len").get<int>();
      if (e.contains("cumulative_threshold"))
        cfg.engine.cumulative_threshold = e.at("cumulative_threshold").get<int>();
      if (e.contains("max_steps")) cfg.engine.max_steps = e.at("max_steps").get<int>();
      if (e.contains("match_len_min"))
        cfg.engine.retrieval.match_len_min = e.at("match_len_min").get<int>();
      if (e.contains("max_branch")) cfg.engine.retrieval.max_branch = e.at("max_branch").get<int>();
      if (e.contains("max_continuation"))
        cfg.engine.retrieval.max_continuation = e.at("max_continuation").get<int>();
    }
    if (doc.contains("calibration")) {
      const auto& c = doc.at("calibration");
      if (c.contains("top_k")) cfg.calibration.top_k = c.at("top_k").get<int>();
      if (c.contains("prob_min")) cfg.calibration.prob_min = c.at("prob_min").get<double>();
      if (c.contains("max_depth")) cfg.calibration.max_depth = c.at("max_depth").get<int>();
      if (c.contains("max_nodes")) cfg.calibration.max_nodes = c.at("max_nodes").get<int>();
    }
    cfg.validate();
    return cfg;
  }

  static ExperimentConfig from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc);
  }

  nlohmann::json to_json() const {
    return {{"workload", workload.to_json()},
            {"cost_model", cost.to_json()},
            {"variants", variants},
            {"engine",
             {{"target_draft_len", engine.target_draft_len},
              {"cumulative_threshold", engine.cumulative_threshold},
              {"max_steps", engine.max_steps},
              {"match_len_min", engine.retrieval.match_len_min},
              {"max_branch", engine.retrieval.max_branch},
              {"max_continuation", engine.retrieval.max_continuation}}},
            {"calibration",
             {{"top_k", calibration.top_k},
              {"prob_min", calibration.prob_min},
              {"max_depth", calibration.max_depth},
              {"max_nodes", calibration.max_nodes}}}};
  }
};

struct TaskResult {
  int task = 0;
  std::string variant;
  double acceptance_ratio = 0.0;
  double ms_per_token = 0.0;
  int steps = 0;
  int tokens_out = 0;
  CaseCounts cases;
  double mean_draft_len = 0.0;
  int reuse_added = 0;
  int reuse_discarded = 0;
  bool truncated = false;
};

struct VariantSummary {
  std::string variant;
  double mean_acceptance_ratio = 0.0;
  double mean_ms_per_token = 0.0;
  double mean_draft_len = 0.0;
  double median_draft_len = 0.0;
  CaseCounts case_totals;
  std::map<std::string, int> draft_len_histogram;
};

struct RunReport {
  nlohmann::json config_echo;
  std::vector<TaskResult> tasks;
  std::vector<VariantSummary> variants;

  nlohmann::json to_json() const {
    nlohmann::json task_rows = nlohmann::json::array();
    for (const auto& r : tasks) {
      task_rows.push_back({{"task", r.task},
                           {"variant", r.variant},
                           {"acceptance_ratio", r.acceptance_ratio},
                           {"ms_per_token", r.ms_per_token},
                           {"steps", r.steps},
                           {"tokens_out", r.tokens_out},
                           {"cases",
                            {{"missing", r.cases.missing},
                             {"synonym", r.cases.synonym},
                             {"redundant", r.cases.redundant}}},
                           {"mean_draft_len", r.mean_draft_len},
                           {"reuse_added", r.reuse_added},
                           {"reuse_discarded", r.reuse_discarded},
                           {"truncated", r.truncated}});
    }
    nlohmann::json vsum = nlohmann::json::object();
    for (const auto& v : variants) {
      vsum[v.variant] = {{"mean_acceptance_ratio", v.mean_acceptance_ratio},
                         {"mean_ms_per_token", v.mean_ms_per_token},
                         {"mean_draft_len", v.mean_draft_len},
                         {"median_draft_len", v.median_draft_len},
                         {"case_totals",
                          {{"missing", v.case_totals.missing},
                           {"synonym", v.case_totals.synonym},
                           {"redundant", v.case_totals.redundant}}},
                         {"draft_len_histogram", v.draft_len_histogram}};
    }
    return {{"version", kSpecdecVersion},
            {"config", config_echo},
            {"tasks", task_rows},
            {"variants", vsum}};
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "task,variant,acceptance_ratio,ms_per_token,steps,tokens_out,"
           "mean_draft_len,missing,synonym,redundant,truncated\n";
    for (const auto& r : tasks) {
      out << r.task << ',' << r.variant << ',' << r.acceptance_ratio << ','
          << r.ms_per_token << ',' << r.steps << ',' << r.tokens_out << ','
          << r.mean_draft_len << ',' << r.cases.missing << ',' << r.cases.synonym << ','
          << r.cases.redundant << ',' << (r.truncated ? 1 : 0) << '\n';
    }
    return out.str();
  }

  const VariantSummary& summary(const std::string& name) const {
    for (const auto& v : variants)
      if (v.variant == name) return v;
    throw std::invalid_argument("report: no variant '" + name + "'");
  }
};

namespace detail {

inline std::string histogram_bucket(int len) {
  if (len <= 0) return "0";
  if (len == 1) return "1";
  if (len <= 3) return "2-3";
  if (len <= 7) return "4-7";
  if (len <= 15) return "8-15";
  if (len <= 31) return "16-31";
  return "32+";
}

}  // namespace detail

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Workload wl = generate_workload(cfg.workload);
  RunReport report;
  report.config_echo = cfg.to_json();

  std::vector<TokenSeq> references;
  for (const auto& task : wl.tasks) {
    int cap = cfg.engine.max_steps * std::max(1, cfg.engine.target_draft_len + 1);
    references.push_back(greedy_decode(wl.lm, task.prompt, cap));
  }

  for (const auto& vname : cfg.variants) {
    Variant variant = parse_variant(vname);
    VariantSummary sum;
    sum.variant = vname;
    std::vector<int> pooled_lens;
    double acc = 0.0, ms = 0.0, mdl = 0.0;

    for (std::size_t t = 0; t < wl.tasks.size(); ++t) {
      const Task& task = wl.tasks[t];
      DraftStore store(cfg.engine.retrieval);
      if (variant.drafting) {
        store.index_context(task.prompt);
        if (variant.calibration) {
          LogitMatrix logits = prefill(wl.lm, task.context);
          merge_into_store(store, calibrate(task.context, logits, cfg.calibration));
        }
      }
      EngineConfig ecfg = cfg.engine;
      ecfg.enable_drafting = variant.drafting;
      ecfg.enable_reuse = variant.reuse;
      DecodeResult res = decode(wl.lm, store, task.prompt, ecfg);

      bool lossless;
      if (res.stats.truncated) {
        // step budget ran out: the emitted stream must still be a greedy prefix
        lossless = res.output.size() <= references[t].size() &&
                   std::equal(res.output.begin(), res.output.end(), references[t].begin());
      } else {
        lossless = res.output == references[t];
      }
      if (!lossless)
        throw std::logic_error("run_experiment: losslessness violated on task " +
                               std::to_string(t) + " variant " + vname);

      TaskResult row;
      row.task = static_cast<int>(t);
      row.variant = vname;
      row.acceptance_ratio = res.stats.acceptance_ratio;
      row.ms_per_token = simulated_latency(res.stats, cfg.cost);
      row.steps = res.stats.steps;
      row.tokens_out = res.stats.tokens_out;
      row.cases = res.stats.case_counts;
      row.mean_draft_len = res.stats.mean_draft_len();
      row.reuse_added = res.stats.reuse_segments_added;
      row.reuse_discarded = res.stats.reuse_segments_discarded;
      row.truncated = res.stats.truncated;
      report.tasks.push_back(row);

      acc += row.acceptance_ratio;
      ms += row.ms_per_token;
      mdl += row.mean_draft_len;
      sum.case_totals.missing += row.cases.missing;
      sum.case_totals.synonym += row.cases.synonym;
      sum.case_totals.redundant += row.cases.redundant;
      for (int len : res.stats.per_step_draft_lens) {
        pooled_lens.push_back(len);
        sum.draft_len_histogram[detail::histogram_bucket(len)]++;
      }
    }

    double n = static_cast<double>(wl.tasks.size());
    sum.mean_acceptance_ratio = acc / n;
    sum.mean_ms_per_token = ms / n;
    sum.mean_draft_len = mdl / n;
    if (!pooled_lens.empty()) {
      std::sort(pooled_lens.begin(), pooled_lens.end());
      std::size_t m = pooled_lens.size();
      sum.median_draft_len = (m % 2 == 1)
          ? pooled_lens[m / 2]
          : (pooled_lens[m / 2 - 1] + pooled_lens[m / 2]) / 2.0;
    }
    report.variants.push_back(std::move(sum));
  }
  return report;
}

}  // namespace specdec
