#include "specdec/scheduler.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace specdec;

TEST_CASE("construction shape", "[reduction]") {
  ScheduleInstance inst = reduce_partition({3, 1, 2});
  REQUIRE(inst.block_count() == 4);
  CHECK(inst.chunks == 2);
  // item blocks carry the values as load times and compute nothing
  CHECK(inst.blocks[0].load_g2 == 3);
  CHECK(inst.blocks[1].load_g2 == 1);
  CHECK(inst.blocks[2].load_g2 == 2);
  CHECK(inst.blocks[0].compute_g1 == 0);
  CHECK(inst.blocks[0].compute_g2_sub == 0);
  // the long block closes each chunk with a half-sum window and is strictly
  // slower on the decoding graph
  CHECK(inst.blocks[3].load_g2 == 0);
  CHECK(inst.blocks[3].compute_g1 == 3);
  CHECK(inst.blocks[3].compute_g2_sub == 4);
  CHECK(inst.ideal_prefill() == 6);

  CHECK_THROWS_AS(reduce_partition({}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_partition({2, -1}), std::invalid_argument);
}

TEST_CASE("symmetric pair is feasible", "[reduction]") {
  CHECK(feasible(reduce_partition({1, 1})));
  CHECK(partition_exists({1, 1}));
}

TEST_CASE("odd sum is infeasible", "[reduction]") {
  CHECK_FALSE(feasible(reduce_partition({1, 1, 1})));
  CHECK_FALSE(partition_exists({1, 1, 1}));
}

TEST_CASE("single unbalanced item is infeasible", "[reduction]") {
  CHECK_FALSE(feasible(reduce_partition({4})));
  CHECK_FALSE(partition_exists({4}));
}

TEST_CASE("feasibility equals subset-sum on random multisets", "[reduction][property]") {
  std::mt19937_64 rng(51);
  for (int iter = 0; iter < 400; ++iter) {
    int m = 1 + static_cast<int>(rng() % 10);
    std::vector<std::int64_t> values;
    for (int i = 0; i < m; ++i) values.push_back(1 + static_cast<std::int64_t>(rng() % 8));
    bool expect = partition_exists(values);
    bool got = feasible(reduce_partition(values));
    INFO("m=" << m);
    CHECK(got == expect);
  }
}

TEST_CASE("feasible instances admit a witness the simulator confirms", "[reduction]") {
  // hand witness for {2, 1, 1}: half = 2; {2} hides in chunk 1's window,
  // {1, 1} in chunk 2's
  ScheduleInstance inst = reduce_partition({2, 1, 1});
  REQUIRE(feasible(inst));
  int n = inst.block_count();
  SwitchPlan plan;
  plan.issue_slot = {n - 1, 2 * n - 1, 2 * n - 1, 2 * n};  // item0 before L's first run,
  plan.window_len.assign(4, 0);                            // items 1,2 before L's second
  plan.load_order = canonical_load_order(plan.issue_slot);
  LatencyReport rep = simulate(inst, plan);
  validate_trace(inst, plan, rep);
  CHECK(rep.overall <= inst.ideal_prefill());
}

TEST_CASE("feasible falls back to exhaustive search when G2 is faster", "[reduction]") {
  // decoding graph strictly faster than prefill: the packing argument does
  // not apply and the decision goes through brute force
  ScheduleInstance inst;
  inst.chunks = 1;
  inst.subchunk_factor = 1;
  inst.blocks = {{2, 6, 3}, {0, 6, 3}};
  CHECK_NOTHROW(feasible(inst));
}

TEST_CASE("budget violations surface as size errors", "[reduction]") {
  ScheduleInstance inst;
  inst.chunks = 1;
  inst.subchunk_factor = 1;
  for (int i = 0; i < 12; ++i) inst.blocks.push_back({1, 6, 3});  // G2 faster, N too big
  CHECK_THROWS_AS(feasible(inst), std::length_error);
}
