// External file formats. History JSONL is covered in test_retrieval; this
// file pins the schemas the CLI reads and writes.

#include "specdec/experiment.hpp"
#include "specdec/scheduler.hpp"
#include "specdec/table_lm.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace specdec;

TEST_CASE("model json schema", "[formats]") {
  nlohmann::json doc = {
      {"order", 1},
      {"eos", "</s>"},
      {"entries",
       nlohmann::json::array(
           {{{"context", {"the"}}, {"probs", {{"cat", 0.75}, {"dog", 0.25}}}},
            {{"context", {"cat"}}, {"probs", {{"</s>", 1.0}}}}})}};
  TableLM lm = TableLM::from_json(doc);
  CHECK(lm.order() == 1);
  CHECK(lm.vocab().contains("cat"));
  CHECK(greedy_next(lm, {lm.vocab().id("the")}) == lm.vocab().id("cat"));

  nlohmann::json missing = {{"order", 1}, {"eos", "x"}};
  CHECK_THROWS_AS(TableLM::from_json(missing), std::invalid_argument);
}

TEST_CASE("derived vocabulary ordering is lexicographic", "[formats]") {
  nlohmann::json doc = {
      {"order", 1},
      {"eos", "zz"},
      {"entries",
       nlohmann::json::array({{{"context", {"bb"}}, {"probs", {{"aa", 1.0}}}}})}};
  TableLM lm = TableLM::from_json(doc);
  CHECK(lm.vocab().str(0) == "aa");
  CHECK(lm.vocab().str(1) == "bb");
  CHECK(lm.vocab().str(2) == "zz");
}

TEST_CASE("instance json matches the documented schema", "[formats]") {
  nlohmann::json doc = {{"chunks", 2},
                        {"subchunk_factor", 4},
                        {"blocks", nlohmann::json::array({
                             {{"load_g2", 10}, {"compute_g1", 8}, {"compute_g2_sub", 2}},
                             {{"load_g2", 0}, {"compute_g1", 8}, {"compute_g2_sub", 2}},
                         })}};
  ScheduleInstance inst = ScheduleInstance::from_json(doc);
  CHECK(inst.block_count() == 2);
  CHECK(inst.g2_chunk_cost(0) == 8);
  // round trip
  CHECK(ScheduleInstance::from_json(inst.to_json()).to_json() == inst.to_json());
}

TEST_CASE("trace csv column layout", "[formats]") {
  ScheduleInstance inst;
  inst.chunks = 1;
  inst.subchunk_factor = 1;
  inst.blocks = {{2, 5, 5}};
  LatencyReport rep = simulate(inst, synchronous_plan(inst));
  std::istringstream csv(trace_to_csv(rep));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "event,block,start,end");
  std::getline(csv, line);
  CHECK(line == "compute_g1,0,0,5");
  std::getline(csv, line);
  CHECK(line == "load,0,5,7");
}

TEST_CASE("report json carries config echo, tasks and variant summaries", "[formats]") {
  ExperimentConfig cfg;
  cfg.workload.seed = 2;
  cfg.workload.n_tasks = 2;
  cfg.workload.target_len = 24;
  cfg.workload.vocab_size = 128;
  cfg.workload.context_len = 48;
  cfg.variants = {"vanilla", "plain"};
  RunReport report = run_experiment(cfg);
  nlohmann::json doc = report.to_json();
  CHECK(doc.at("version") == kSpecdecVersion);
  CHECK(doc.at("config").at("workload").at("seed") == 2);
  CHECK(doc.at("tasks").size() == 4);  // 2 tasks x 2 variants
  CHECK(doc.at("variants").contains("plain"));
  CHECK(doc.at("variants").at("plain").contains("draft_len_histogram"));

  std::istringstream csv(report.to_csv());
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "task,variant,acceptance_ratio,ms_per_token,steps,tokens_out,"
        "mean_draft_len,missing,synonym,redundant,truncated");
}

TEST_CASE("cost model json round trip", "[formats]") {
  CostModel cm = CostModel::default_model();
  cm.draft_cost_per_step = 1.5;
  CostModel back = CostModel::from_json(cm.to_json());
  CHECK(back.draft_cost_per_step == 1.5);
  CHECK(back.verify_cost(32) == Catch::Approx(5.7));
}
