#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/agents.hpp"
#include "proper/reranker.hpp"
#include "proper/wire_format.hpp"

namespace proper {

struct AggregateReport {
  double mu_a = 0.0;
  double mu_b = 0.0;
  double win_a = 0.0;  // percent, ties split evenly
  double win_b = 0.0;
  std::size_t n = 0;
  std::size_t ties = 0;
  std::size_t incomplete = 0;  // records left out of every statistic
  double p_value = 1.0;
};

// Compares effective side scores of complete records. Throws InvalidInput
// when no complete record remains.
AggregateReport aggregate(const std::vector<EvalRecord>& records);

// Two-sided exact binomial test over decisive pairs, ties dropped.
double sign_test(std::size_t wins_a, std::size_t wins_b);
double sign_test(const std::vector<EvalRecord>& records);

nlohmann::json to_json(const AggregateReport& r);

struct PairwiseReport {
  static constexpr int kVersion = 1;
  std::string label_a = "A";
  std::string label_b = "B";
  // One row per dataset, in first-seen order.
  std::vector<std::pair<std::string, AggregateReport>> rows;
  std::vector<EvalRecord> records;
  std::vector<std::string> record_datasets;  // parallel to records
};

PairwiseReport pairwise_report(const std::vector<EvalRecord>& records, const std::vector<std::string>& datasets,
                               std::string label_a, std::string label_b);
nlohmann::json to_json(const PairwiseReport& r);
std::string render_table(const PairwiseReport& r);

struct SweepSample {
  std::string dataset;
  std::string sample_id;
  InteractionState state;
};

struct SweepCell {
  std::optional<double> mu;  // empty when no sample of the cell was judged
  std::size_t judged = 0;
  std::size_t failed = 0;
  bool incomplete = false;
  std::vector<std::string> errors;  // "<sample_id>: <message>"

  friend bool operator==(const SweepCell&, const SweepCell&) = default;
};

struct SweepReport {
  static constexpr int kVersion = 1;
  std::vector<LambdaPreset> presets;
  std::vector<std::string> datasets;
  // grid[preset][dataset]
  std::vector<std::vector<SweepCell>> grid;

  const SweepCell& cell(std::size_t preset, std::size_t dataset) const;
};

bool operator==(const LambdaPreset& a, const LambdaPreset& b);
bool operator==(const SweepReport& a, const SweepReport& b);

// Runs the full pipeline per (sample, preset) and judges each final response
// (side A) against the sample's baseline response (side B); a cell's score is
// the mean A score. All presets are validated before any model call.
SweepReport lambda_sweep(const std::vector<SweepSample>& samples, const std::vector<LambdaPreset>& presets,
                         std::shared_ptr<ChatProvider> chat, std::shared_ptr<const EmbeddingProvider> embedder,
                         const AgentConfig& base);

nlohmann::json to_json(const SweepReport& r);
SweepReport sweep_report_from_json(const nlohmann::json& j);
// Presets as rows, datasets as columns; incomplete cells carry a '*'.
std::string render_table(const SweepReport& r);

struct ConversationTurn {
  std::string query;
  std::string response_a;
  std::string response_b;
};

struct Conversation {
  std::string id;
  std::string dataset;
  std::vector<ConversationTurn> turns;
};

// {"id","dataset","turns":[{"query","response_a","response_b"}, ...]}.
// Throws InvalidInput describing the first problem.
Conversation conversation_from_json(const nlohmann::json& j);

struct DominanceRow {
  std::string dataset;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
  std::size_t failed = 0;   // judge errors, counted in the denominator
  std::size_t skipped = 0;  // malformed, not counted

  std::size_t denominator() const { return wins_a + wins_b + ties + failed; }
  // "11/12"
  std::string counts() const;
};

struct DominanceReport {
  static constexpr int kVersion = 1;
  std::vector<DominanceRow> rows;  // first-seen dataset order
  std::vector<std::string> warnings;
};

// Judges each conversation once on its full transcript per side. A strictly
// higher effective score wins; equal scores count for neither side.
DominanceReport multiturn_dominance(const std::vector<nlohmann::json>& conversations, const Agents& judge);

// Query and per-side transcript handed to the judge.
std::string trajectory_query(const Conversation& c);
std::string trajectory_transcript(const Conversation& c, bool side_a);

nlohmann::json to_json(const DominanceReport& r);
std::string render_table(const DominanceReport& r);

}  // namespace proper
