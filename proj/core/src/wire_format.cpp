#include "proper/wire_format.hpp"

#include <initializer_list>

#include "proper/text.hpp"

namespace proper {

namespace {

[[noreturn]] void parse_fail(ErrorCode code, const std::string& path, const std::string& message,
                             std::string_view raw) {
  Error e(code, path.empty() ? message : path + ": " + message);
  e.with_path(path).with_raw(std::string(raw));
  throw e;
}

nlohmann::json parse_json(std::string_view raw) {
  try {
    return nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail(ErrorCode::InvalidJson, "", std::string("invalid JSON: ") + e.what(), raw);
  }
}

void require_exact_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> keys,
                        const std::string& path, std::string_view raw) {
  if (!obj.is_object()) parse_fail(ErrorCode::TypeMismatch, path, "expected an object", raw);
  for (auto key : keys) {
    if (!obj.contains(key)) {
      const std::string p = path.empty() ? std::string(key) : path + "." + std::string(key);
      parse_fail(ErrorCode::MissingKey, p, "missing required key", raw);
    }
  }
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || k == key;
    if (!known) {
      const std::string p = path.empty() ? key : path + "." + key;
      parse_fail(ErrorCode::ExtraField, p, "unexpected field", raw);
    }
  }
}

std::string required_string(const nlohmann::json& obj, const std::string& key, const std::string& path,
                            std::string_view raw) {
  const auto& v = obj.at(key);
  const std::string p = path + "." + key;
  if (!v.is_string()) parse_fail(ErrorCode::TypeMismatch, p, "expected a string", raw);
  const auto& s = v.get_ref<const std::string&>();
  if (text::is_blank(s)) parse_fail(ErrorCode::EmptyValue, p, "must not be empty", raw);
  return s;
}

std::vector<Dimension> parse_dimension_array(const nlohmann::json& root, const std::string& key, Origin origin,
                                             std::string_view raw) {
  const auto& arr = root.at(key);
  if (!arr.is_array()) parse_fail(ErrorCode::TypeMismatch, key, "expected an array", raw);
  std::vector<Dimension> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = key + "[" + std::to_string(i) + "]";
    const auto& el = arr[i];
    require_exact_keys(el, {"name", "value", "justification"}, path, raw);
    const auto name = required_string(el, "name", path, raw);
    const auto value = required_string(el, "value", path, raw);
    std::optional<std::string> justification;
    const auto& j = el.at("justification");
    if (j.is_string()) {
      justification = j.get<std::string>();
    } else if (!j.is_null()) {
      parse_fail(ErrorCode::TypeMismatch, path + ".justification", "expected a string or null", raw);
    }
    out.push_back(Dimension::make(name, value, std::move(justification), origin));
  }
  return out;
}

nlohmann::json wire_array(const std::vector<Dimension>& dims) {
  auto arr = nlohmann::json::array();
  for (const auto& d : dims) arr.push_back(to_wire_json(d));
  return arr;
}

int parse_score(const nlohmann::json& obj, const char* key, std::string_view raw) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) parse_fail(ErrorCode::TypeMismatch, key, "score must be an integer", raw);
  const auto score = v.get<long long>();
  if (score < 0 || score > 5) {
    parse_fail(ErrorCode::ScoreOutOfRange, key, "score " + std::to_string(score) + " is outside 0..5", raw);
  }
  return static_cast<int>(score);
}

}  // namespace

std::string extract_between_markers(std::string_view text, std::string_view start, std::string_view end) {
  if (start.empty() || end.empty()) fail(ErrorCode::InvalidInput, "markers must be non-empty");
  const auto s = text.find(start);
  if (s == std::string_view::npos) {
    Error e(ErrorCode::MissingStartMarker, "missing " + std::string(start));
    e.with_raw(std::string(text));
    throw e;
  }
  const auto content_begin = s + start.size();
  const auto e_pos = text.find(end, content_begin);
  if (e_pos == std::string_view::npos) {
    const bool earlier = text.substr(0, s).find(end) != std::string_view::npos;
    Error e(earlier ? ErrorCode::EndBeforeStart : ErrorCode::MissingEndMarker,
            earlier ? std::string(end) + " appears before " + std::string(start)
                    : "missing " + std::string(end));
    e.with_raw(std::string(text));
    throw e;
  }
  return std::string(text::trim_newlines(text.substr(content_begin, e_pos - content_begin)));
}

DimensionPayload parse_dimension_json(std::string_view inner) {
  const auto root = parse_json(inner);
  require_exact_keys(root, {"explicit_dimensions", "missed_dimensions"}, "", inner);
  DimensionPayload out;
  out.explicit_dims = parse_dimension_array(root, "explicit_dimensions", Origin::UserExplicit, inner);
  out.missed = parse_dimension_array(root, "missed_dimensions", Origin::Implicit, inner);
  return out;
}

std::string format_dimension_output(const DimensionPayload& payload) {
  nlohmann::ordered_json j;
  j["explicit_dimensions"] = wire_array(payload.explicit_dims);
  j["missed_dimensions"] = wire_array(payload.missed);
  return std::string(kStartJsonMarker) + "\n" + j.dump(2) + "\n" + std::string(kEndJsonMarker);
}

AspectPayload parse_aspect_json(std::string_view text) {
  const auto root = parse_json(text);
  require_exact_keys(root, {"user_aspects", "solution_aspects"}, "", text);
  AspectPayload out;
  out.user_aspects = parse_dimension_array(root, "user_aspects", Origin::UserExplicit, text);
  out.solution_aspects = parse_dimension_array(root, "solution_aspects", Origin::SystemExplicit, text);
  return out;
}

std::string format_aspect_json(const AspectPayload& payload) {
  nlohmann::ordered_json j;
  j["user_aspects"] = wire_array(payload.user_aspects);
  j["solution_aspects"] = wire_array(payload.solution_aspects);
  return j.dump(2);
}

double EvalRecord::effective_a() const {
  if (!swapped_pass) return score_a;
  return (score_a + swapped_pass->score_a) / 2.0;
}

double EvalRecord::effective_b() const {
  if (!swapped_pass) return score_b;
  return (score_b + swapped_pass->score_b) / 2.0;
}

nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json j = {{"sample_id", r.sample_id},
                      {"score_a", r.score_a},
                      {"score_b", r.score_b},
                      {"justification_a", r.justification_a},
                      {"justification_b", r.justification_b},
                      {"incomplete", r.incomplete}};
  if (r.swapped_pass) {
    j["swapped_pass"] = {{"score_a", r.swapped_pass->score_a},
                         {"score_b", r.swapped_pass->score_b},
                         {"justification_a", r.swapped_pass->justification_a},
                         {"justification_b", r.swapped_pass->justification_b}};
  } else {
    j["swapped_pass"] = nullptr;
  }
  if (r.incomplete) j["error"] = r.error;
  return j;
}

EvalRecord eval_record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  try {
    r.sample_id = j.value("sample_id", std::string());
    r.incomplete = j.value("incomplete", false);
    r.error = j.value("error", std::string());
    if (!r.incomplete) {
      r.score_a = j.at("score_a").get<int>();
      r.score_b = j.at("score_b").get<int>();
      r.justification_a = j.value("justification_a", std::string());
      r.justification_b = j.value("justification_b", std::string());
      if (j.contains("swapped_pass") && !j["swapped_pass"].is_null()) {
        const auto& s = j["swapped_pass"];
        r.swapped_pass = JudgeVerdict{s.at("score_a").get<int>(), s.at("score_b").get<int>(),
                                      s.value("justification_a", std::string()),
                                      s.value("justification_b", std::string())};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed eval record: ") + e.what());
  }
  auto in_range = [](int s) { return s >= 0 && s <= 5; };
  if (!r.incomplete && (!in_range(r.score_a) || !in_range(r.score_b) ||
                        (r.swapped_pass && (!in_range(r.swapped_pass->score_a) ||
                                            !in_range(r.swapped_pass->score_b))))) {
    fail(ErrorCode::ScoreOutOfRange, "eval record " + r.sample_id + " has a score outside 0..5");
  }
  return r;
}

EvalRecord parse_judge_json(std::string_view text) {
  const auto root = parse_json(text);
  require_exact_keys(root,
                     {"response_A_score", "response_B_score", "response_A_justification",
                      "response_B_justification"},
                     "", text);
  EvalRecord r;
  r.score_a = parse_score(root, "response_A_score", text);
  r.score_b = parse_score(root, "response_B_score", text);
  for (const char* key : {"response_A_justification", "response_B_justification"}) {
    const auto& v = root.at(key);
    if (!v.is_string()) parse_fail(ErrorCode::TypeMismatch, key, "expected a string", text);
    if (text::is_blank(v.get_ref<const std::string&>())) {
      parse_fail(ErrorCode::EmptyValue, key, "must not be empty", text);
    }
  }
  r.justification_a = root["response_A_justification"].get<std::string>();
  r.justification_b = root["response_B_justification"].get<std::string>();
  return r;
}

std::string format_judge_json(const JudgeVerdict& v) {
  nlohmann::ordered_json j;
  j["response_A_score"] = v.score_a;
  j["response_B_score"] = v.score_b;
  j["response_A_justification"] = v.justification_a;
  j["response_B_justification"] = v.justification_b;
  return j.dump(2);
}

}  // namespace proper
