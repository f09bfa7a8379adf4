#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/chat.hpp"
#include "proper/dimensions.hpp"
#include "proper/reranker.hpp"
#include "proper/wire_format.hpp"

namespace proper {

enum class ConfidenceMode { MeanToken, SumToken };

std::string_view to_string(ConfidenceMode m);
ConfidenceMode confidence_mode_from_string(std::string_view s);

struct ModelIds {
  std::string baseline;
  std::string dga;
  std::string rga;
  std::string judge;
  std::string annotate;
};

struct Temperatures {
  double baseline = 0.7;
  double dga = 0.0;
  double annotate = 0.0;
  double rga = 0.7;
  double judge = 0.0;
};

struct AgentConfig {
  Domain domain = Domain::Medical;
  ModelIds models;
  Temperatures temperatures;
  int max_tokens = 2048;
  RerankConfig rerank;
  double match_threshold = SemanticMatcher::kDefaultThreshold;
  EmbeddingTextMode embedding_text = EmbeddingTextMode::NameValue;
  double dedupe_threshold = PoolOptions::kDefaultDedupeThreshold;
  ConfidenceMode confidence = ConfidenceMode::MeanToken;
  // Extra attempts that re-ask the model with the parse error appended.
  int repair_retries = 0;
  bool judge_swap_ab = false;
  // Wall-clock stage durations make traces non-reproducible, so they are opt-in.
  bool record_timings = false;

  // Throws Configuration on blank model ids or invalid thresholds.
  void validate() const;
};

// One model call made by a stage.
struct StageRecord {
  std::string stage;
  std::string model;
  std::string request_id;  // request_key of the final request
  int attempts = 1;
  int repairs = 0;
  std::optional<double> duration_ms;
};

struct StageLog {
  std::vector<StageRecord> records;
  std::vector<std::string> warnings;
};

struct DgaResult {
  std::vector<Dimension> explicit_dims;  // UserExplicit
  std::vector<Dimension> implicit;       // Implicit, with confidence when available
  bool logprobs_unavailable = false;
  // Implicit dimensions whose span could not be located in the token stream.
  int unscored = 0;
};

struct RgaResult {
  std::string text;
  std::string missed_aspects;  // the rendered <missed_aspects> block
  int new_questions = 0;
};

struct CotResult {
  std::string baseline;
  AspectPayload aspects;
  std::string final_response;
};

struct AnnotationInputs {
  std::string query;
  std::string response;  // solution code, doctor response, or product
  std::optional<Persona> persona;
};

enum class AblationVariant { None, NoDga, NoReranker, NoRga };

std::string_view to_string(AblationVariant v);
AblationVariant ablation_from_string(std::string_view s);

struct StageFailure {
  std::string stage;
  ErrorCode code = ErrorCode::InvalidState;
  std::string message;
  std::string path;
  std::string raw_text;
};

struct PipelineTrace {
  static constexpr int kVersion = 1;

  std::string sample_id;
  AblationVariant variant = AblationVariant::None;
  InteractionState state;
  std::string dga_model;
  std::string r0;
  std::vector<Dimension> user_explicit;
  std::vector<Dimension> system_explicit;
  std::vector<Dimension> implicit_candidates;
  bool dga_logprobs_unavailable = false;
  std::optional<ActivationPool> pool;
  std::optional<SelectionResult> selection;
  // Dimensions handed to the response stage, explicit first.
  std::vector<Dimension> forwarded;
  std::string missed_aspects;
  std::string final_response;
  StageLog log;
  std::optional<StageFailure> failure;

  bool ok() const { return !failure.has_value(); }
};

nlohmann::json to_json(const PipelineTrace& t);

// The query as handed to prompt slots: an optional "User persona:" line,
// prior turns when there are any, then the current query.
std::string query_block(const InteractionState& s, bool with_persona);

// Numbered list, one line per dimension:
//   "1. [explicit] name — value (justification)"
// Tags: explicit, system, implicit. An empty list renders as "(none)".
std::string format_missed_aspects(const std::vector<Dimension>& dims);

// Sentences ending in '?' in `revised` that do not occur in `original`.
int count_new_questions(std::string_view revised, std::string_view original);

// Log-probability confidence for each implicit dimension, located in the
// token stream by the JSON-encoded name followed by the JSON-encoded value.
// nullopt where the span cannot be found.
std::vector<std::optional<double>> span_confidences(const std::vector<Dimension>& implicit,
                                                    const std::vector<TokenLogprob>& tokens,
                                                    ConfidenceMode mode);

// Annotation prompt followed by the labeled inputs for the domain.
std::string annotation_prompt(Domain d, const AnnotationInputs& in);

class Agents {
 public:
  Agents(std::shared_ptr<ChatProvider> chat, std::shared_ptr<const EmbeddingProvider> embedder,
         AgentConfig config);

  const AgentConfig& config() const noexcept { return config_; }
  const SemanticMatcher& matcher() const noexcept { return matcher_; }

  std::string generate_baseline(const InteractionState& s, StageLog* log = nullptr) const;
  // `model` overrides the configured DGA model id.
  DgaResult run_dga(const InteractionState& s, StageLog* log = nullptr,
                    const std::string* model = nullptr) const;
  std::vector<Dimension> extract_system_dimensions(const InteractionState& s, const std::string& r0,
                                                   StageLog* log = nullptr) const;
  AspectPayload annotate(Domain d, const AnnotationInputs& in, StageLog* log = nullptr) const;
  // Single user-turn completion, trimmed; used by query elicitation.
  std::string complete_text(const std::string& stage, const std::string& model, double temperature,
                            std::string prompt, StageLog* log = nullptr) const;
  RgaResult run_rga(const InteractionState& s, const std::string& r0, const std::vector<Dimension>& unmet,
                    const std::vector<Dimension>& selected, StageLog* log = nullptr) const;
  CotResult run_cot_baseline(const InteractionState& s, StageLog* log = nullptr) const;
  EvalRecord run_judge(const std::string& query, const std::string& response_a, const std::string& response_b,
                       StageLog* log = nullptr) const;

  // Failures stop the pipeline and are reported in trace.failure; the stages
  // completed so far stay in the trace.
  PipelineTrace run_proper(const InteractionState& s, const std::string& sample_id = "") const;
  PipelineTrace run_ablation(const InteractionState& s, AblationVariant variant,
                             const std::string& sample_id = "") const;

 private:
  ChatResponse call(const std::string& stage, ChatRequest req, StageLog* log) const;
  template <typename Parse>
  auto call_parsed(const std::string& stage, ChatRequest req, StageLog* log, Parse&& parse) const
      -> decltype(parse(std::declval<const ChatResponse&>()));

  std::shared_ptr<ChatProvider> chat_;
  std::shared_ptr<const EmbeddingProvider> embedder_;
  AgentConfig config_;
  SemanticMatcher matcher_;
};

}  // namespace proper
