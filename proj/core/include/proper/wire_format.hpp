#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/dimensions.hpp"

namespace proper {

inline constexpr std::string_view kStartJsonMarker = "===START_JSON===";
inline constexpr std::string_view kEndJsonMarker = "===END_JSON===";
inline constexpr std::string_view kStartMarker = "===START===";
inline constexpr std::string_view kEndMarker = "===END===";

// Content between the first `start` and the first `end` after it, with
// leading and trailing newlines removed. Errors carry the raw text:
// MissingStartMarker, MissingEndMarker, or EndBeforeStart when the only end
// marker precedes the start marker.
std::string extract_between_markers(std::string_view text, std::string_view start, std::string_view end);

struct DimensionPayload {
  std::vector<Dimension> explicit_dims;  // origin UserExplicit
  std::vector<Dimension> missed;         // origin Implicit
};

// Strict parse of {"explicit_dimensions":[...],"missed_dimensions":[...]}.
// Each element has exactly "name", "value" (non-blank strings) and
// "justification" (string or null). Errors name the offending path.
DimensionPayload parse_dimension_json(std::string_view inner);

// Inverse of parse_dimension_json, wrapped in the JSON markers.
std::string format_dimension_output(const DimensionPayload& payload);

struct AspectPayload {
  std::vector<Dimension> user_aspects;      // origin UserExplicit
  std::vector<Dimension> solution_aspects;  // origin SystemExplicit
};

// Strict parse of {"user_aspects":[...],"solution_aspects":[...]} with the
// same element schema as parse_dimension_json.
AspectPayload parse_aspect_json(std::string_view text);
std::string format_aspect_json(const AspectPayload& payload);

struct JudgeVerdict {
  int score_a = 0;
  int score_b = 0;
  std::string justification_a;
  std::string justification_b;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

struct EvalRecord {
  std::string sample_id;
  int score_a = 0;
  int score_b = 0;
  std::string justification_a;
  std::string justification_b;
  // Second pass with the responses presented in swapped positions; its scores
  // are mapped back to the original sides.
  std::optional<JudgeVerdict> swapped_pass;
  // Set when judging failed; scores are then meaningless.
  bool incomplete = false;
  std::string error;

  // Side scores averaged over both passes when a swapped pass exists.
  double effective_a() const;
  double effective_b() const;
};

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);

// Exactly the keys response_A_score, response_B_score (integers 0..5),
// response_A_justification, response_B_justification (non-empty strings).
EvalRecord parse_judge_json(std::string_view text);
std::string format_judge_json(const JudgeVerdict& v);

}  // namespace proper
