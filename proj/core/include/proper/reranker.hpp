#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/dimensions.hpp"

namespace proper {

// How the anchor-similarity term enters the objective.
//   PenaltyAsWritten:   quality - l1 * alignment - l2 * redundancy
//   RewardAsDescribed:  quality + l1 * alignment - l2 * redundancy
enum class AlignmentSign { PenaltyAsWritten, RewardAsDescribed };

// Which dimensions compete for the budget.
//   ImplicitOnly: implicit candidates only; unmet explicit ones bypass the budget.
//   Joint:   unmet explicit and implicit candidates compete together.
enum class PoolMode { ImplicitOnly, Joint };

enum class Solver { Exact, Greedy };

std::string_view to_string(AlignmentSign s);
std::string_view to_string(PoolMode m);
std::string_view to_string(Solver s);
AlignmentSign alignment_sign_from_string(std::string_view s);
PoolMode pool_mode_from_string(std::string_view s);

struct RerankConfig {
  static constexpr int kDefaultBudget = 5;
  static constexpr int kDefaultExactLimit = 20;

  int k = kDefaultBudget;
  double lambda1 = 2.0;
  double lambda2 = 0.5;
  AlignmentSign alignment_sign = AlignmentSign::PenaltyAsWritten;
  PoolMode pool_mode = PoolMode::ImplicitOnly;
  int exact_limit = kDefaultExactLimit;

  // Throws Configuration on a negative budget or a negative / non-finite lambda.
  void validate() const;
};

struct LambdaPreset {
  std::string name;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  // "(8.0,1.0)"
  std::string label() const;
};

// The three calibration regimes swept in the reference evaluation:
// strong (8.0,1.0), moderate (2.0,0.5), light (0.0,0.2).
const std::vector<LambdaPreset>& reference_presets();
// Looks up a reference preset by name; throws Configuration when unknown.
const LambdaPreset& preset_by_name(std::string_view name);

struct ObjectiveBreakdown {
  double objective = 0.0;
  double quality_term = 0.0;
  double alignment_term = 0.0;
  double diversity_term = 0.0;
};

struct SelectionResult {
  std::vector<std::string> selected;  // ascending id order
  double objective = 0.0;
  double quality_term = 0.0;
  double alignment_term = 0.0;
  double diversity_term = 0.0;
  Solver solver = Solver::Exact;
  RerankConfig config;
};

nlohmann::json to_json(const SelectionResult& r);
SelectionResult selection_from_json(const nlohmann::json& j);

// objective = quality - sign * l1 * alignment - l2 * diversity,
// sign = +1 for PenaltyAsWritten and -1 for RewardAsDescribed.
double combine_terms(double quality, double alignment, double diversity, const RerankConfig& cfg);

// The dimensions eligible for selection under cfg.pool_mode.
std::vector<Dimension> candidate_pool(const ActivationPool& pool, const RerankConfig& cfg);

// Scores the set `ids` against the pool. Terms are summed in ascending id
// order. Throws InvalidInput for ids outside the candidate pool and
// InvalidState for missing embeddings.
ObjectiveBreakdown objective(const std::vector<std::string>& ids, const ActivationPool& pool,
                             const RerankConfig& cfg);

// Enumerates every subset of size min(k, n). Throws Capacity when n exceeds
// cfg.exact_limit. Ties go to the larger quality term, then to the
// lexicographically smallest sorted id list.
SelectionResult select_exact(const ActivationPool& pool, const RerankConfig& cfg);

// Adds the candidate with the largest marginal gain until min(k, n) are chosen.
SelectionResult select_greedy(const ActivationPool& pool, const RerankConfig& cfg);

// Exact when the candidate count fits cfg.exact_limit, greedy otherwise.
SelectionResult select(const ActivationPool& pool, const RerankConfig& cfg);

}  // namespace proper
