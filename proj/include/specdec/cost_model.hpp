#pragma once

/**
 * Declarative latency accounting.
 *
 * The cost table is an input, never a measurement: per-token verification
 * cost as a function of draft length (long drafts verify cheaper per token
 * on wide hardware), a fixed drafting cost per step, and the vanilla
 * one-token decode cost. The default table linearly interpolates the two
 * anchor points 51.1 ms/token at length 1 and 5.7 ms/token at length 32,
 * clamped beyond.
 */

#include "specdec/engine.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <vector>

namespace specdec {

struct CostModel {
  double draft_cost_per_step = 3.0;
  double vanilla_token_cost = 51.1;
  std::vector<double> verify_cost_per_token;  // index i = draft length i+1
  bool clamp_beyond = true;

  double verify_cost(int len) const {
    if (len < 1) throw std::invalid_argument("cost model: length must be >= 1");
    int max_len = static_cast<int>(verify_cost_per_token.size());
    if (len > max_len) {
      if (!clamp_beyond)
        throw std::invalid_argument("cost model: draft length " + std::to_string(len) +
                                    " outside cost table (max " + std::to_string(max_len) + ")");
      len = max_len;
    }
    return verify_cost_per_token[static_cast<std::size_t>(len - 1)];
  }

  void validate() const {
    if (verify_cost_per_token.empty())
      throw std::invalid_argument("cost model: empty verify cost table");
    for (std::size_t i = 0; i < verify_cost_per_token.size(); ++i) {
      if (verify_cost_per_token[i] < 0)
        throw std::invalid_argument("cost model: negative cost");
      if (i > 0 && verify_cost_per_token[i] > verify_cost_per_token[i - 1])
        throw std::invalid_argument("cost model: per-token cost must be non-increasing in length");
    }
    if (draft_cost_per_step < 0 || vanilla_token_cost < 0)
      throw std::invalid_argument("cost model: negative cost");
  }

  static CostModel default_model() {
    CostModel cm;
    cm.verify_cost_per_token.resize(32);
    for (int len = 1; len <= 32; ++len) {
      double t = static_cast<double>(len - 1) / 31.0;
      cm.verify_cost_per_token[static_cast<std::size_t>(len - 1)] = 51.1 + (5.7 - 51.1) * t;
    }
    cm.validate();
    return cm;
  }

  static CostModel from_json(const nlohmann::json& doc) {
    CostModel cm = default_model();
    if (doc.contains("draft_cost_per_step"))
      cm.draft_cost_per_step = doc.at("draft_cost_per_step").get<double>();
    if (doc.contains("vanilla_token_cost"))
      cm.vanilla_token_cost = doc.at("vanilla_token_cost").get<double>();
    if (doc.contains("verify_cost"))
      cm.verify_cost_per_token = doc.at("verify_cost").get<std::vector<double>>();
    if (doc.contains("clamp")) cm.clamp_beyond = doc.at("clamp").get<bool>();
    cm.validate();
    return cm;
  }

  static CostModel from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cost model: cannot open " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc);
  }

  nlohmann::json to_json() const {
    return {{"draft_cost_per_step", draft_cost_per_step},
            {"vanilla_token_cost", vanilla_token_cost},
            {"verify_cost", verify_cost_per_token},
            {"clamp", clamp_beyond}};
  }
};

/// Simulated per-token latency of a finished decode: every step pays the
/// drafting cost plus length x per-token verification cost; an empty step
/// still runs one single-token forward pass.
inline double simulated_latency(const DecodeStats& stats, const CostModel& cm) {
  cm.validate();
  if (stats.steps <= 0 || stats.tokens_out <= 0)
    throw std::invalid_argument("simulated_latency: stats from an empty decode");
  double total = 0.0;
  for (int len : stats.per_step_draft_lens) {
    int eff = std::max(1, len);
    total += cm.draft_cost_per_step + static_cast<double>(eff) * cm.verify_cost(eff);
  }
  return total / static_cast<double>(stats.tokens_out);
}

}  // namespace specdec
