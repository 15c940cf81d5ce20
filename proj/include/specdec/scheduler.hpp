#pragma once

/**
 * Progressive graph-switch scheduling and pipeline simulation.
 *
 * A model of N blocks prefills C chunks in block order; every block must
 * switch from the prefill graph (G1) to the decoding graph (G2) exactly
 * once. Compute runs are strictly sequential; graph loads are serialized on
 * a single channel and may overlap other blocks' compute, never their own
 * block's. A block computes a chunk as one G1 pass before its switch and as
 * r sub-chunk G2 passes after it. The objective is the maximum of prefill
 * completion and switch completion.
 *
 * Time is integer (microsecond-style) units throughout; the simulator has no
 * floats, so traces are exactly reproducible.
 */

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace specdec {

using TimeUs = std::int64_t;

struct BlockProfile {
  TimeUs load_g2 = 0;          // time to load this block's decoding graph
  TimeUs compute_g1 = 0;       // one chunk on the prefill graph
  TimeUs compute_g2_sub = 0;   // one sub-chunk on the decoding graph
};

struct ScheduleInstance {
  std::vector<BlockProfile> blocks;
  int chunks = 1;
  int subchunk_factor = 1;  // G2 passes that replace one G1 pass

  int block_count() const { return static_cast<int>(blocks.size()); }
  int total_runs() const { return block_count() * chunks; }

  TimeUs g2_chunk_cost(int b) const {
    return static_cast<TimeUs>(subchunk_factor) * blocks[static_cast<std::size_t>(b)].compute_g2_sub;
  }

  /// Prefill completion with every run on G1 and no delays.
  TimeUs ideal_prefill() const {
    TimeUs s = 0;
    for (const auto& b : blocks) s += b.compute_g1;
    return s * chunks;
  }

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("instance: need at least one block");
    if (chunks < 1) throw std::invalid_argument("instance: chunks must be >= 1");
    if (subchunk_factor < 1)
      throw std::invalid_argument("instance: subchunk_factor must be >= 1");
    for (const auto& b : blocks)
      if (b.load_g2 < 0 || b.compute_g1 < 0 || b.compute_g2_sub < 0)
        throw std::invalid_argument("instance: negative time");
  }

  static ScheduleInstance from_json(const nlohmann::json& doc) {
    ScheduleInstance inst;
    inst.chunks = doc.at("chunks").get<int>();
    inst.subchunk_factor = doc.at("subchunk_factor").get<int>();
    for (const auto& b : doc.at("blocks")) {
      inst.blocks.push_back({b.at("load_g2").get<TimeUs>(),
                             b.at("compute_g1").get<TimeUs>(),
                             b.at("compute_g2_sub").get<TimeUs>()});
    }
    inst.validate();
    return inst;
  }

  static ScheduleInstance from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("instance: cannot open " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc);
  }

  nlohmann::json to_json() const {
    nlohmann::json bl = nlohmann::json::array();
    for (const auto& b : blocks)
      bl.push_back({{"load_g2", b.load_g2},
                    {"compute_g1", b.compute_g1},
                    {"compute_g2_sub", b.compute_g2_sub}});
    return {{"chunks", chunks}, {"subchunk_factor", subchunk_factor}, {"blocks", bl}};
  }
};

/// When each block's G2 load is issued. Slot g (0 <= g < C*N) means "at the
/// boundary preceding global compute run g"; slot C*N means after the final
/// run. Loads execute serialized in load_order, which must carry
/// non-decreasing slots.
struct SwitchPlan {
  std::vector<int> issue_slot;
  std::vector<int> load_order;
  std::vector<int> window_len;  // greedy only: compute runs covering the load (0 = none)

  void validate(const ScheduleInstance& inst) const {
    int n = inst.block_count();
    int total = inst.total_runs();
    if (static_cast<int>(issue_slot.size()) != n)
      throw std::invalid_argument("plan: issue_slot size mismatch");
    if (static_cast<int>(load_order.size()) != n)
      throw std::invalid_argument("plan: load_order size mismatch");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    int prev = -1;
    for (int b : load_order) {
      if (b < 0 || b >= n || seen[static_cast<std::size_t>(b)])
        throw std::invalid_argument("plan: load_order is not a permutation");
      seen[static_cast<std::size_t>(b)] = true;
      int s = issue_slot[static_cast<std::size_t>(b)];
      if (s < 0 || s > total) throw std::invalid_argument("plan: slot out of range");
      if (s < prev) throw std::invalid_argument("plan: slots must be non-decreasing in load order");
      prev = s;
    }
  }
};

/// Sorts blocks by (slot, block descending); the tie rule matches the
/// back-to-front switch order.
inline std::vector<int> canonical_load_order(const std::vector<int>& issue_slot) {
  std::vector<int> order(issue_slot.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (issue_slot[static_cast<std::size_t>(a)] != issue_slot[static_cast<std::size_t>(b)])
      return issue_slot[static_cast<std::size_t>(a)] < issue_slot[static_cast<std::size_t>(b)];
    return a > b;
  });
  return order;
}

struct TraceEvent {
  enum Kind { ComputeG1, ComputeG2, Load };
  Kind kind;
  int block;
  int chunk;  // -1 for loads
  TimeUs start;
  TimeUs end;
};

inline const char* to_string(TraceEvent::Kind k) {
  switch (k) {
    case TraceEvent::ComputeG1: return "compute_g1";
    case TraceEvent::ComputeG2: return "compute_g2";
    case TraceEvent::Load: return "load";
  }
  return "?";
}

struct LatencyReport {
  TimeUs prefill_done = 0;
  TimeUs switch_done = 0;
  TimeUs overall = 0;
  std::vector<TraceEvent> events;
};

/// Deterministic playback of a plan. Loads become committed at their issue
/// boundary (start = max(boundary, load channel free)); a committed load
/// takes precedence over its own block's next compute run, which defers to
/// the load end and then runs on G2.
inline LatencyReport simulate(const ScheduleInstance& inst, const SwitchPlan& plan) {
  inst.validate();
  plan.validate(inst);
  int n = inst.block_count();
  int total = inst.total_runs();

  std::vector<TimeUs> load_start(static_cast<std::size_t>(n), 0);
  std::vector<TimeUs> load_end(static_cast<std::size_t>(n), 0);
  std::vector<bool> load_fixed(static_cast<std::size_t>(n), false);
  std::vector<TimeUs> boundary_time(static_cast<std::size_t>(total) + 1, 0);
  TimeUs channel_free = 0;
  TimeUs boundary = 0;
  std::size_t li = 0;
  LatencyReport rep;

  auto fix_loads_at = [&](int slot) {
    while (li < plan.load_order.size()) {
      int b = plan.load_order[li];
      if (plan.issue_slot[static_cast<std::size_t>(b)] != slot) break;
      TimeUs s = std::max(boundary_time[static_cast<std::size_t>(slot)], channel_free);
      load_start[static_cast<std::size_t>(b)] = s;
      load_end[static_cast<std::size_t>(b)] = s + inst.blocks[static_cast<std::size_t>(b)].load_g2;
      load_fixed[static_cast<std::size_t>(b)] = true;
      channel_free = load_end[static_cast<std::size_t>(b)];
      rep.events.push_back({TraceEvent::Load, b, -1, s, load_end[static_cast<std::size_t>(b)]});
      ++li;
    }
  };

  for (int g = 0; g < total; ++g) {
    boundary_time[static_cast<std::size_t>(g)] = boundary;
    fix_loads_at(g);
    int b = g % n;
    int chunk = g / n;
    TimeUs start = boundary;
    bool switched = false;
    if (load_fixed[static_cast<std::size_t>(b)]) {
      TimeUs ls = load_start[static_cast<std::size_t>(b)];
      TimeUs le = load_end[static_cast<std::size_t>(b)];
      if (le <= start) {
        switched = true;
      } else if (ls < le && ls < start + inst.blocks[static_cast<std::size_t>(b)].compute_g1) {
        start = le;  // own load in flight: the run waits, then executes switched
        switched = true;
      }
    }
    if (switched) {
      TimeUs sub = inst.blocks[static_cast<std::size_t>(b)].compute_g2_sub;
      TimeUs t = start;
      for (int s = 0; s < inst.subchunk_factor; ++s) {
        rep.events.push_back({TraceEvent::ComputeG2, b, chunk, t, t + sub});
        t += sub;
      }
      boundary = t;
    } else {
      TimeUs end = start + inst.blocks[static_cast<std::size_t>(b)].compute_g1;
      rep.events.push_back({TraceEvent::ComputeG1, b, chunk, start, end});
      boundary = end;
    }
  }
  boundary_time[static_cast<std::size_t>(total)] = boundary;
  fix_loads_at(total);

  rep.prefill_done = boundary;
  rep.switch_done = 0;
  for (int b = 0; b < n; ++b)
    rep.switch_done = std::max(rep.switch_done, load_end[static_cast<std::size_t>(b)]);
  rep.overall = std::max(rep.prefill_done, rep.switch_done);
  return rep;
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

/// All loads after the final compute run.
inline SwitchPlan synchronous_plan(const ScheduleInstance& inst) {
  inst.validate();
  int n = inst.block_count();
  SwitchPlan p;
  p.issue_slot.assign(static_cast<std::size_t>(n), inst.total_runs());
  p.window_len.assign(static_cast<std::size_t>(n), 0);
  p.load_order = canonical_load_order(p.issue_slot);
  return p;
}

/// Each block's load is issued right after its own final-chunk compute run.
inline SwitchPlan naive_async_plan(const ScheduleInstance& inst) {
  inst.validate();
  int n = inst.block_count();
  SwitchPlan p;
  p.issue_slot.resize(static_cast<std::size_t>(n));
  p.window_len.assign(static_cast<std::size_t>(n), 0);
  for (int b = 0; b < n; ++b)
    p.issue_slot[static_cast<std::size_t>(b)] = (inst.chunks - 1) * n + b + 1;
  p.load_order = canonical_load_order(p.issue_slot);
  return p;
}

/// Estimated duration of global run g under the planned slots: a block runs
/// on G2 from the run its load is issued at.
inline TimeUs planned_run_duration(const ScheduleInstance& est,
                                   const std::vector<int>& issue_slot, int g) {
  int b = g % est.block_count();
  bool switched = issue_slot[static_cast<std::size_t>(b)] <= g;
  return switched ? est.g2_chunk_cost(b) : est.blocks[static_cast<std::size_t>(b)].compute_g1;
}

/**
 * Progressive greedy plan: blocks switch back-to-front; before each load the
 * smallest k >= 1 is chosen whose next k compute runs (at their currently
 * planned graphs) sum to at least the load time, and the load is issued with
 * that window. Loads whose remaining compute cannot cover them are issued
 * after the final run. If the progressive plan simulates worse than
 * synchronous loading (possible when G2 prefill is much slower than G1), the
 * synchronous plan is returned instead.
 *
 * `estimates` lets a caller plan with perturbed profile numbers while the
 * instance keeps the true ones.
 */
inline SwitchPlan greedy_schedule(const ScheduleInstance& inst,
                                  const ScheduleInstance* estimates = nullptr) {
  inst.validate();
  const ScheduleInstance& est = estimates ? *estimates : inst;
  if (estimates) {
    estimates->validate();
    if (est.block_count() != inst.block_count() || est.chunks != inst.chunks ||
        est.subchunk_factor != inst.subchunk_factor)
      throw std::invalid_argument("greedy_schedule: estimate shape mismatch");
  }
  int n = inst.block_count();
  int total = inst.total_runs();

  SwitchPlan plan;
  plan.issue_slot.assign(static_cast<std::size_t>(n), total);
  plan.window_len.assign(static_cast<std::size_t>(n), 0);

  int pointer = 0;
  for (int j = n - 1; j >= 0; --j) {
    TimeUs need = est.blocks[static_cast<std::size_t>(j)].load_g2;
    // the window may only cover other blocks' runs: a block cannot compute
    // while its own graph loads, so hitting one of j's runs restarts the
    // window just past it
    int window_start = pointer;
    TimeUs sum = 0;
    int k = 0;
    bool found = false;
    for (int q = pointer; q < total; ++q) {
      if (q % n == j) {
        window_start = q + 1;
        sum = 0;
        k = 0;
        continue;
      }
      sum += planned_run_duration(est, plan.issue_slot, q);
      ++k;
      if (sum >= need) {
        found = true;
        break;
      }
    }
    if (found) {
      plan.issue_slot[static_cast<std::size_t>(j)] = window_start;
      plan.window_len[static_cast<std::size_t>(j)] = k;
      pointer = window_start + k;
    }
  }
  plan.load_order = canonical_load_order(plan.issue_slot);

  SwitchPlan sync = synchronous_plan(inst);
  if (simulate(inst, plan).overall > simulate(inst, sync).overall) return sync;
  return plan;
}

/// Eq-style compliance of a greedy plan against an estimate table: each
/// windowed load fits under its window's summed compute and the window is
/// minimal. Sentinel loads have no window and nothing to satisfy.
struct GreedyCompliance {
  bool ok = true;
  bool any_sentinel_load = false;      // a positive load spilled past all compute
  bool window_holds_own_run = false;   // a window covering the switching block itself
  std::string detail;
};

inline GreedyCompliance check_greedy_compliance(const ScheduleInstance& est,
                                                const SwitchPlan& plan) {
  GreedyCompliance res;
  int n = est.block_count();
  int total = est.total_runs();
  for (int b = 0; b < n; ++b) {
    int slot = plan.issue_slot[static_cast<std::size_t>(b)];
    int k = plan.window_len[static_cast<std::size_t>(b)];
    TimeUs need = est.blocks[static_cast<std::size_t>(b)].load_g2;
    if (slot == total || k == 0) {
      if (need > 0) res.any_sentinel_load = true;
      continue;
    }
    TimeUs sum = 0;
    for (int q = slot; q < slot + k; ++q) {
      if (q % n == b) res.window_holds_own_run = true;
      sum += planned_run_duration(est, plan.issue_slot, q);
    }
    if (sum < need) {
      res.ok = false;
      res.detail = "window sum below load for block " + std::to_string(b);
      return res;
    }
    if (k > 1) {
      TimeUs sub = sum - planned_run_duration(est, plan.issue_slot, slot + k - 1);
      if (sub >= need) {
        res.ok = false;
        res.detail = "window not minimal for block " + std::to_string(b);
        return res;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Exact search
// ---------------------------------------------------------------------------

struct BruteForceResult {
  SwitchPlan plan;
  LatencyReport report;
  std::uint64_t plans_tried = 0;
};

inline std::uint64_t brute_force_plan_count(const ScheduleInstance& inst) {
  std::uint64_t total = static_cast<std::uint64_t>(inst.total_runs()) + 1;
  std::uint64_t count = 1;
  for (int i = 0; i < inst.block_count(); ++i) {
    if (count > (UINT64_MAX / total)) return UINT64_MAX;
    count *= total;
  }
  return count;
}

/// Exhaustive minimization of overall latency over all issue-slot
/// assignments with the canonical load order. Refuses instances beyond the
/// enumeration budget.
inline BruteForceResult brute_force_schedule(const ScheduleInstance& inst,
                                             std::uint64_t plan_budget = 2000000) {
  inst.validate();
  if (inst.block_count() > 8 || inst.chunks > 3)
    throw std::length_error("brute_force_schedule: instance exceeds N<=8, C<=3 budget");
  std::uint64_t count = brute_force_plan_count(inst);
  if (count > plan_budget)
    throw std::length_error("brute_force_schedule: " + std::to_string(count) +
                            " plans exceed budget " + std::to_string(plan_budget));

  int n = inst.block_count();
  int total = inst.total_runs();
  SwitchPlan cur;
  cur.issue_slot.assign(static_cast<std::size_t>(n), 0);
  cur.window_len.assign(static_cast<std::size_t>(n), 0);

  BruteForceResult best;
  bool have_best = false;
  while (true) {
    cur.load_order = canonical_load_order(cur.issue_slot);
    LatencyReport rep = simulate(inst, cur);
    ++best.plans_tried;
    if (!have_best || rep.overall < best.report.overall) {
      best.plan = cur;
      best.report = rep;
      have_best = true;
    }
    // odometer over slot vectors
    int i = 0;
    for (; i < n; ++i) {
      if (cur.issue_slot[static_cast<std::size_t>(i)] < total) {
        ++cur.issue_slot[static_cast<std::size_t>(i)];
        break;
      }
      cur.issue_slot[static_cast<std::size_t>(i)] = 0;
    }
    if (i == n) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// 2-Partition reduction
// ---------------------------------------------------------------------------

/// Scheduling instance encoding a 2-Partition multiset: one zero-compute
/// block per item carrying its value as load time, plus a trailing long
/// block whose two G1 runs are the only windows the loads can hide in. Item
/// blocks compute identically on both graphs so a switch never perturbs the
/// prefill timeline; the long block is strictly slower on G2 and must stay
/// on G1 through both chunks.
inline ScheduleInstance reduce_partition(const std::vector<std::int64_t>& values) {
  if (values.empty()) throw std::invalid_argument("reduce_partition: empty multiset");
  TimeUs sum = 0;
  for (auto v : values) {
    if (v <= 0) throw std::invalid_argument("reduce_partition: values must be positive");
    sum += v;
  }
  TimeUs half = sum / 2;  // odd sums produce an infeasible instance
  ScheduleInstance inst;
  inst.chunks = 2;
  inst.subchunk_factor = 1;
  for (auto v : values) inst.blocks.push_back({v, 0, 0});
  inst.blocks.push_back({0, half, half + 1});
  return inst;
}

// ---------------------------------------------------------------------------
// Feasibility: can all switches hide under prefill?
// ---------------------------------------------------------------------------

/// True iff some plan reaches overall latency <= the undelayed all-G1
/// prefill time. For instances where G2 prefill is never faster than G1
/// (always true for reduce_partition output) an exact interval-packing
/// search over the ideal timeline decides this; otherwise the brute-force
/// enumerator is consulted, subject to its budget.
inline bool feasible(const ScheduleInstance& inst, std::uint64_t plan_budget = 2000000) {
  inst.validate();
  int n = inst.block_count();
  int chunks = inst.chunks;
  int total = inst.total_runs();
  TimeUs target = inst.ideal_prefill();

  for (int b = 0; b < n; ++b) {
    if (inst.g2_chunk_cost(b) < inst.blocks[static_cast<std::size_t>(b)].compute_g1) {
      // G2-faster blocks can beat the all-G1 prefill; fall back to search
      return brute_force_schedule(inst, plan_budget).report.overall <= target;
    }
  }

  // ideal (all-G1, undelayed) timeline
  std::vector<TimeUs> run_start(static_cast<std::size_t>(total));
  std::vector<TimeUs> run_end(static_cast<std::size_t>(total));
  TimeUs t = 0;
  for (int g = 0; g < total; ++g) {
    run_start[static_cast<std::size_t>(g)] = t;
    t += inst.blocks[static_cast<std::size_t>(g % n)].compute_g1;
    run_end[static_cast<std::size_t>(g)] = t;
  }

  std::vector<TimeUs> boundaries;
  for (int g = 0; g < total; ++g) boundaries.push_back(run_start[static_cast<std::size_t>(g)]);
  boundaries.push_back(target);
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

  std::vector<bool> strict(static_cast<std::size_t>(n));
  std::vector<TimeUs> last_run_end(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    strict[static_cast<std::size_t>(b)] =
        inst.g2_chunk_cost(b) > inst.blocks[static_cast<std::size_t>(b)].compute_g1;
    last_run_end[static_cast<std::size_t>(b)] =
        run_end[static_cast<std::size_t>((chunks - 1) * n + b)];
  }

  TimeUs total_load = 0;
  for (const auto& b : inst.blocks) total_load += b.load_g2;

  // A load may not be placed across any of its own block's run intervals
  // (that would delay the run) nor strictly across a zero-length run instant.
  auto conflicts_own_runs = [&](int b, TimeUs s, TimeUs e) {
    if (s == e) return false;
    for (int c = 0; c < chunks; ++c) {
      TimeUs rs = run_start[static_cast<std::size_t>(c * n + b)];
      TimeUs re = run_end[static_cast<std::size_t>(c * n + b)];
      if (s < re && e > rs) return true;
      if (rs == re && s < rs && e > rs) return true;
    }
    return false;
  };

  std::set<std::pair<std::uint32_t, TimeUs>> failed;
  auto dfs = [&](auto&& self, std::uint32_t mask, TimeUs prev_end, TimeUs remaining) -> bool {
    if (mask == (1u << n) - 1u) return true;
    if (prev_end + remaining > target) return false;
    auto key = std::make_pair(mask, prev_end);
    if (failed.count(key)) return false;
    for (int b = 0; b < n; ++b) {
      if (mask & (1u << b)) continue;
      TimeUs dur = inst.blocks[static_cast<std::size_t>(b)].load_g2;
      for (std::size_t bi = 0; bi <= boundaries.size(); ++bi) {
        TimeUs s;
        if (bi == boundaries.size()) {
          s = prev_end;  // continuation on a busy channel
        } else {
          s = boundaries[bi];
          if (s <= prev_end) continue;  // covered by the continuation start
        }
        TimeUs e = s + dur;
        if (e > target) continue;
        if (strict[static_cast<std::size_t>(b)] && s < last_run_end[static_cast<std::size_t>(b)])
          continue;
        if (conflicts_own_runs(b, s, e)) continue;
        if (self(self, mask | (1u << b), e, remaining - dur)) return true;
      }
    }
    failed.insert(key);
    return false;
  };

  return dfs(dfs, 0u, 0, total_load);
}

/// Subset-sum check used as the independent oracle for the reduction tests.
inline bool partition_exists(const std::vector<std::int64_t>& values) {
  std::int64_t sum = 0;
  for (auto v : values) {
    if (v <= 0) throw std::invalid_argument("partition_exists: values must be positive");
    sum += v;
  }
  if (sum % 2 != 0) return false;
  std::int64_t half = sum / 2;
  std::vector<char> reach(static_cast<std::size_t>(half) + 1, 0);
  reach[0] = 1;
  for (auto v : values)
    for (std::int64_t s = half; s >= v; --s)
      if (reach[static_cast<std::size_t>(s - v)]) reach[static_cast<std::size_t>(s)] = 1;
  return reach[static_cast<std::size_t>(half)] != 0;
}

// ---------------------------------------------------------------------------
// Trace checks and export
// ---------------------------------------------------------------------------

/// Re-derives the pipeline rules from a produced timeline; throws when any
/// is violated. Used by tests and the acceptance suite.
inline void validate_trace(const ScheduleInstance& inst, const SwitchPlan& plan,
                           const LatencyReport& rep) {
  int n = inst.block_count();
  std::vector<const TraceEvent*> loads(static_cast<std::size_t>(n), nullptr);
  std::vector<std::vector<const TraceEvent*>> computes(
      static_cast<std::size_t>(n), std::vector<const TraceEvent*>());
  std::vector<const TraceEvent*> compute_seq;
  for (const auto& ev : rep.events) {
    if (ev.kind == TraceEvent::Load) {
      if (loads[static_cast<std::size_t>(ev.block)])
        throw std::logic_error("trace: block loaded twice");
      loads[static_cast<std::size_t>(ev.block)] = &ev;
    } else {
      computes[static_cast<std::size_t>(ev.block)].push_back(&ev);
      compute_seq.push_back(&ev);
    }
  }
  for (int b = 0; b < n; ++b)
    if (!loads[static_cast<std::size_t>(b)])
      throw std::logic_error("trace: block never switched");

  // computes strictly sequential and in pipeline order
  for (std::size_t i = 1; i < compute_seq.size(); ++i)
    if (compute_seq[i]->start < compute_seq[i - 1]->end)
      throw std::logic_error("trace: overlapping compute");
  int expected_g = 0;
  std::size_t i = 0;
  while (i < compute_seq.size()) {
    int b = expected_g % n;
    int chunk = expected_g / n;
    if (compute_seq[i]->block != b || compute_seq[i]->chunk != chunk)
      throw std::logic_error("trace: compute out of pipeline order");
    if (compute_seq[i]->kind == TraceEvent::ComputeG2) {
      // r contiguous sub-chunk passes cover the chunk
      for (int s = 0; s < inst.subchunk_factor; ++s, ++i) {
        if (i >= compute_seq.size() || compute_seq[i]->kind != TraceEvent::ComputeG2 ||
            compute_seq[i]->block != b || compute_seq[i]->chunk != chunk)
          throw std::logic_error("trace: incomplete sub-chunk group");
        if (s > 0 && compute_seq[i]->start != compute_seq[i - 1]->end)
          throw std::logic_error("trace: sub-chunks not contiguous");
      }
    } else {
      ++i;
    }
    ++expected_g;
  }
  if (expected_g != inst.total_runs())
    throw std::logic_error("trace: chunk coverage incomplete");

  // loads serialized in plan order
  TimeUs prev = 0;
  for (int b : plan.load_order) {
    const TraceEvent* ev = loads[static_cast<std::size_t>(b)];
    if (ev->start < prev) throw std::logic_error("trace: loads overlap on the channel");
    prev = ev->end;
  }

  // no load in flight during its own block's compute
  for (int b = 0; b < n; ++b) {
    const TraceEvent* ld = loads[static_cast<std::size_t>(b)];
    if (ld->start == ld->end) continue;
    for (const TraceEvent* cv : computes[static_cast<std::size_t>(b)]) {
      if (cv->start == cv->end) continue;
      if (ld->start < cv->end && ld->end > cv->start)
        throw std::logic_error("trace: block computes while its own load is in flight");
    }
  }

  // graph consistent with load completion
  for (int b = 0; b < n; ++b) {
    const TraceEvent* ld = loads[static_cast<std::size_t>(b)];
    for (const TraceEvent* cv : computes[static_cast<std::size_t>(b)]) {
      bool switched = ld->end <= cv->start;
      bool is_g2 = cv->kind == TraceEvent::ComputeG2;
      if (switched != is_g2)
        throw std::logic_error("trace: graph inconsistent with switch time");
    }
  }

  TimeUs prefill = 0, switch_done = 0;
  for (const auto& ev : rep.events) {
    if (ev.kind == TraceEvent::Load) switch_done = std::max(switch_done, ev.end);
    else prefill = std::max(prefill, ev.end);
  }
  if (prefill != rep.prefill_done || switch_done != rep.switch_done ||
      rep.overall != std::max(prefill, switch_done))
    throw std::logic_error("trace: completion times inconsistent");
}

/// CSV export for external Gantt plotting: event,block,start,end.
inline std::string trace_to_csv(const LatencyReport& rep) {
  std::vector<TraceEvent> evs = rep.events;
  std::stable_sort(evs.begin(), evs.end(), [](const TraceEvent& a, const TraceEvent& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.block < b.block;
  });
  std::ostringstream out;
  out << "event,block,start,end\n";
  for (const auto& ev : evs)
    out << to_string(ev.kind) << ',' << ev.block << ',' << ev.start << ',' << ev.end << '\n';
  return out.str();
}

/// Profile noise for robustness experiments: every time scaled by a factor
/// drawn uniformly from [1-pct, 1+pct].
inline ScheduleInstance perturb_profiles(const ScheduleInstance& inst, double pct,
                                         std::uint64_t seed) {
  if (pct < 0.0 || pct >= 1.0)
    throw std::invalid_argument("perturb_profiles: pct must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(1.0 - pct, 1.0 + pct);
  ScheduleInstance out = inst;
  auto scale = [&](TimeUs v) {
    return static_cast<TimeUs>(std::llround(static_cast<double>(v) * factor(rng)));
  };
  for (auto& b : out.blocks) {
    b.load_g2 = std::max<TimeUs>(0, scale(b.load_g2));
    b.compute_g1 = std::max<TimeUs>(0, scale(b.compute_g1));
    b.compute_g2_sub = std::max<TimeUs>(0, scale(b.compute_g2_sub));
  }
  return out;
}

}  // namespace specdec
