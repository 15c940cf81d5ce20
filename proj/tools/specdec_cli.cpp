// Command-line front end: decode with a table model, schedule and simulate
// graph switching, run seeded benchmark matrices, and build 2-Partition
// scheduling instances.

#include "specdec/calibration.hpp"
#include "specdec/cost_model.hpp"
#include "specdec/draft_store.hpp"
#include "specdec/engine.hpp"
#include "specdec/experiment.hpp"
#include "specdec/scheduler.hpp"
#include "specdec/table_lm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

nlohmann::json step_trace_json(const specdec::StepRecord& rec, const specdec::Vocab& vocab) {
  nlohmann::json j;
  j["draft_len"] = rec.draft_len;
  j["accepted"] = rec.accepted;
  j["correction"] = vocab.str(rec.correction);
  j["case"] = rec.rejection_case ? nlohmann::json(specdec::to_string(*rec.rejection_case))
                                 : nlohmann::json(nullptr);
  j["reuse_active"] = rec.reuse_active;
  return j;
}

int cmd_decode(const std::string& lm_path, const std::string& prompt_text,
               const std::string& context_text, bool calibrate_flag, bool no_reuse,
               bool no_drafting, int max_steps, const std::string& trace_path,
               const std::string& history_path) {
  specdec::TableLM lm = specdec::TableLM::from_json_file(lm_path);
  specdec::TokenSeq prompt = lm.vocab().encode(split_ws(prompt_text));
  specdec::TokenSeq context = lm.vocab().encode(split_ws(context_text));

  specdec::EngineConfig cfg;
  cfg.enable_drafting = !no_drafting;
  cfg.enable_reuse = !no_reuse;
  if (max_steps > 0) cfg.max_steps = max_steps;

  specdec::DraftStore store(cfg.retrieval);
  specdec::TokenSeq full = context;
  full.insert(full.end(), prompt.begin(), prompt.end());
  if (full.empty()) throw std::runtime_error("decode: empty prompt");
  store.index_context(full);
  if (!history_path.empty()) {
    std::ifstream probe(history_path);
    if (probe.good()) store.load_history(history_path, lm.vocab());
  }
  if (calibrate_flag) {
    if (context.empty()) throw std::runtime_error("decode: --calibrate needs --context");
    specdec::LogitMatrix logits = specdec::prefill(lm, context);
    specdec::merge_into_store(store, specdec::calibrate(context, logits, {}));
  }

  specdec::DecodeResult res = specdec::decode(lm, store, full, cfg, !trace_path.empty());

  if (!trace_path.empty()) {
    std::ostringstream out;
    for (const auto& rec : res.trace) out << step_trace_json(rec, lm.vocab()).dump() << "\n";
    write_file(trace_path, out.str());
  }
  if (!history_path.empty()) {
    specdec::add_history(store, res.output);
    store.save_history(history_path, lm.vocab());
  }

  nlohmann::json out;
  out["output"] = lm.vocab().decode(res.output);
  out["stats"] = {{"steps", res.stats.steps},
                  {"tokens_out", res.stats.tokens_out},
                  {"acceptance_ratio", res.stats.acceptance_ratio},
                  {"mean_draft_len", res.stats.mean_draft_len()},
                  {"cases",
                   {{"missing", res.stats.case_counts.missing},
                    {"synonym", res.stats.case_counts.synonym},
                    {"redundant", res.stats.case_counts.redundant}}},
                  {"truncated", res.stats.truncated}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_schedule(const std::string& instance_path, const std::string& algo,
                 const std::string& trace_path, double noise_pct,
                 std::uint64_t noise_seed) {
  specdec::ScheduleInstance inst = specdec::ScheduleInstance::from_json_file(instance_path);
  specdec::SwitchPlan plan;
  if (algo == "greedy") {
    if (noise_pct > 0.0) {
      specdec::ScheduleInstance est = specdec::perturb_profiles(inst, noise_pct, noise_seed);
      plan = specdec::greedy_schedule(inst, &est);
    } else {
      plan = specdec::greedy_schedule(inst);
    }
  } else if (algo == "synchronous") {
    plan = specdec::synchronous_plan(inst);
  } else if (algo == "naive-async") {
    plan = specdec::naive_async_plan(inst);
  } else if (algo == "brute-force") {
    plan = specdec::brute_force_schedule(inst).plan;
  } else {
    throw std::runtime_error("unknown algorithm '" + algo + "'");
  }
  specdec::LatencyReport rep = specdec::simulate(inst, plan);
  if (!trace_path.empty()) write_file(trace_path, specdec::trace_to_csv(rep));

  nlohmann::json out;
  out["algo"] = algo;
  out["prefill_done"] = rep.prefill_done;
  out["switch_done"] = rep.switch_done;
  out["overall"] = rep.overall;
  out["plan"] = {{"issue_slot", plan.issue_slot}, {"load_order", plan.load_order}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_bench(const std::string& config_path, std::uint64_t seed,
              const std::string& out_path, const std::string& csv_path,
              const std::vector<std::string>& variant_override) {
  specdec::ExperimentConfig cfg = config_path.empty()
      ? specdec::ExperimentConfig{}
      : specdec::ExperimentConfig::from_json_file(config_path);
  cfg.workload.seed = seed;
  if (!variant_override.empty()) cfg.variants = variant_override;
  cfg.validate();

  specdec::RunReport report = specdec::run_experiment(cfg);
  std::string doc = report.to_json().dump(2);
  if (!out_path.empty()) write_file(out_path, doc + "\n");
  if (!csv_path.empty()) write_file(csv_path, report.to_csv());

  for (const auto& v : report.variants) {
    std::cout << v.variant << ": acceptance=" << v.mean_acceptance_ratio
              << " ms/token=" << v.mean_ms_per_token
              << " mean_draft_len=" << v.mean_draft_len << "\n";
  }
  if (out_path.empty() && csv_path.empty()) std::cout << doc << "\n";
  return 0;
}

int cmd_reduce_partition(const std::string& values_text, const std::string& out_path,
                         bool check) {
  std::vector<std::int64_t> values;
  std::string item;
  std::istringstream in(values_text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) values.push_back(std::stoll(item));
  }
  specdec::ScheduleInstance inst = specdec::reduce_partition(values);
  if (!out_path.empty()) write_file(out_path, inst.to_json().dump(2) + "\n");

  nlohmann::json out;
  out["values"] = values;
  out["instance"] = inst.to_json();
  if (check) {
    out["feasible"] = specdec::feasible(inst);
    out["partition_exists"] = specdec::partition_exists(values);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-based speculative decoding and graph-switch scheduling, desk scale"};
  app.require_subcommand(1);

  // decode
  std::string lm_path, prompt_text, context_text, trace_path, history_path;
  bool calibrate_flag = false, no_reuse = false, no_drafting = false;
  int max_steps = 0;
  auto* decode = app.add_subcommand("decode", "speculative decoding with a table model");
  decode->add_option("--lm", lm_path, "model JSON file")->required();
  decode->add_option("--prompt", prompt_text, "whitespace-separated prompt tokens")->required();
  decode->add_option("--context", context_text, "context tokens prepended to the prompt");
  decode->add_flag("--calibrate", calibrate_flag, "build a calibrated tree from context prefill");
  decode->add_flag("--no-reuse", no_reuse, "disable draft reuse");
  decode->add_flag("--no-drafting", no_drafting, "vanilla greedy steps only");
  decode->add_option("--max-steps", max_steps, "verification step budget");
  decode->add_option("--trace", trace_path, "write per-step JSONL trace");
  decode->add_option("--history", history_path, "history JSONL database to load and update");

  // schedule
  std::string instance_path, algo = "greedy", sched_trace;
  double noise_pct = 0.0;
  std::uint64_t noise_seed = 0;
  auto* schedule = app.add_subcommand("schedule", "plan and simulate graph switching");
  schedule->add_option("--instance", instance_path, "instance JSON file")->required();
  schedule->add_option("--algo", algo, "greedy | synchronous | naive-async | brute-force");
  schedule->add_option("--trace", sched_trace, "write timeline CSV");
  schedule->add_option("--noise-pct", noise_pct, "perturb planning estimates by +-pct");
  schedule->add_option("--noise-seed", noise_seed, "seed for estimate noise");

  // bench
  std::string config_path, report_path, csv_path;
  std::uint64_t seed = 0;
  std::vector<std::string> variant_override;
  auto* bench = app.add_subcommand("bench", "run a seeded experiment matrix");
  bench->add_option("--config", config_path, "experiment config JSON");
  bench->add_option("--seed", seed, "workload seed")->required();
  bench->add_option("--out", report_path, "report JSON path");
  bench->add_option("--csv", csv_path, "per-task CSV path");
  bench->add_option("--variants", variant_override, "override variant list");

  // reduce-partition
  std::string values_text, rp_out;
  bool rp_check = false;
  auto* rp = app.add_subcommand("reduce-partition",
                                "build a scheduling instance from a 2-Partition multiset");
  rp->add_option("--values", values_text, "comma-separated positive integers")->required();
  rp->add_option("--out", rp_out, "instance JSON path");
  rp->add_flag("--check", rp_check, "decide feasibility and cross-check subset-sum");

  CLI11_PARSE(app, argc, argv);

  try {
    if (decode->parsed())
      return cmd_decode(lm_path, prompt_text, context_text, calibrate_flag, no_reuse,
                        no_drafting, max_steps, trace_path, history_path);
    if (schedule->parsed())
      return cmd_schedule(instance_path, algo, sched_trace, noise_pct, noise_seed);
    if (bench->parsed())
      return cmd_bench(config_path, seed, report_path, csv_path, variant_override);
    if (rp->parsed()) return cmd_reduce_partition(values_text, rp_out, rp_check);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
