#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/wire_format.hpp"

namespace proper::testing {

enum class WireKind { Dga, Rga, Judge };

struct WireSample {
  WireKind kind;
  std::string text;
  std::optional<ErrorCode> expected;  // empty for well-formed outputs
  std::string label;
};

// Parses `text` the way the pipeline does for that stage.
inline void parse_wire(WireKind kind, const std::string& text) {
  switch (kind) {
    case WireKind::Dga:
      (void)parse_dimension_json(extract_between_markers(text, kStartJsonMarker, kEndJsonMarker));
      return;
    case WireKind::Rga:
      (void)extract_between_markers(text, kStartMarker, kEndMarker);
      return;
    case WireKind::Judge:
      (void)parse_judge_json(text);
      return;
  }
}

inline std::string random_words(std::mt19937_64& rng, int lo, int hi) {
  static const std::vector<std::string> pool = {
      "budget", "sleep", "dosage", "edge", "cases", "input", "size", "allergy", "timeline", "price",
      "battery", "weight", "memory", "recursion", "sodium", "\"quoted\"", "ünïcode", "a/b", "50%", "line\\break"};
  std::uniform_int_distribution<int> len(lo, hi);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::string out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) out += (i ? " " : "") + pool[pick(rng)];
  return out;
}

inline nlohmann::ordered_json random_dimension_json(std::mt19937_64& rng) {
  nlohmann::ordered_json d;
  d["name"] = random_words(rng, 1, 3);
  d["value"] = random_words(rng, 1, 6);
  if (rng() % 3 == 0) {
    d["justification"] = nullptr;
  } else {
    d["justification"] = random_words(rng, 2, 8);
  }
  return d;
}

inline nlohmann::ordered_json random_dga_json(std::mt19937_64& rng) {
  nlohmann::ordered_json j;
  j["explicit_dimensions"] = nlohmann::ordered_json::array();
  j["missed_dimensions"] = nlohmann::ordered_json::array();
  for (int i = static_cast<int>(rng() % 4); i > 0; --i) j["explicit_dimensions"].push_back(random_dimension_json(rng));
  for (int i = static_cast<int>(rng() % 6); i > 0; --i) j["missed_dimensions"].push_back(random_dimension_json(rng));
  return j;
}

inline std::string wrap_dga(const std::string& body, std::mt19937_64& rng) {
  const std::string pre = rng() % 2 ? "Analysis follows.\n" : "";
  const std::string post = rng() % 2 ? "\nDone." : "";
  return pre + std::string(kStartJsonMarker) + "\n" + body + "\n" + std::string(kEndJsonMarker) + post;
}

inline std::vector<WireSample> well_formed_samples(std::uint64_t seed, int per_kind) {
  std::mt19937_64 rng(seed);
  std::vector<WireSample> out;
  for (int i = 0; i < per_kind; ++i) {
    const auto j = random_dga_json(rng);
    out.push_back({WireKind::Dga, wrap_dga(j.dump(rng() % 2 ? 2 : -1), rng), std::nullopt, "dga"});
  }
  for (int i = 0; i < per_kind; ++i) {
    std::string body = random_words(rng, 5, 40);
    if (rng() % 2) body += "?\n- " + random_words(rng, 2, 6);
    const std::string pre = rng() % 2 ? "Sure.\n" : "";
    out.push_back({WireKind::Rga, pre + std::string(kStartMarker) + "\n" + body + "\n" + std::string(kEndMarker),
                   std::nullopt, "rga"});
  }
  for (int i = 0; i < per_kind; ++i) {
    JudgeVerdict v{static_cast<int>(rng() % 6), static_cast<int>(rng() % 6), random_words(rng, 1, 8),
                   random_words(rng, 1, 8)};
    out.push_back({WireKind::Judge, format_judge_json(v), std::nullopt, "judge"});
  }
  return out;
}

// Thirty corrupted outputs, each paired with the error it must raise.
inline std::vector<WireSample> mutant_samples(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<WireSample> out;
  auto dga = [&](const std::function<void(nlohmann::ordered_json&)>& mutate, ErrorCode code, std::string label) {
    auto j = random_dga_json(rng);
    j["missed_dimensions"].push_back(random_dimension_json(rng));
    mutate(j);
    out.push_back({WireKind::Dga, wrap_dga(j.dump(2), rng), code, std::move(label)});
  };
  auto last = [](nlohmann::ordered_json& j) -> nlohmann::ordered_json& { return j["missed_dimensions"].back(); };

  dga([&](auto& j) { last(j).erase("justification"); }, ErrorCode::MissingKey, "dga missing justification");
  dga([&](auto& j) { last(j).erase("name"); }, ErrorCode::MissingKey, "dga missing name");
  dga([&](auto& j) { j.erase("missed_dimensions"); }, ErrorCode::MissingKey, "dga missing array");
  dga([&](auto& j) { last(j)["score"] = 1; }, ErrorCode::ExtraField, "dga extra field");
  dga([&](auto& j) { j["notes"] = "x"; }, ErrorCode::ExtraField, "dga extra top-level key");
  dga([&](auto& j) { last(j)["value"] = 42; }, ErrorCode::TypeMismatch, "dga numeric value");
  dga([&](auto& j) { last(j)["justification"] = true; }, ErrorCode::TypeMismatch, "dga boolean justification");
  dga([&](auto& j) { j["missed_dimensions"] = "none"; }, ErrorCode::TypeMismatch, "dga array is a string");
  dga([&](auto& j) { last(j)["value"] = "   "; }, ErrorCode::EmptyValue, "dga blank value");
  dga([&](auto& j) { last(j)["name"] = ""; }, ErrorCode::EmptyValue, "dga empty name");

  const auto good = format_dimension_output({});
  auto inner = [&](const std::string& s) { return s.substr(s.find('\n') + 1, s.rfind('\n') - s.find('\n') - 1); };
  out.push_back({WireKind::Dga, inner(good), ErrorCode::MissingStartMarker, "dga no start marker"});
  out.push_back({WireKind::Dga, std::string(kStartJsonMarker) + "\n" + inner(good), ErrorCode::MissingEndMarker,
                 "dga truncated"});
  out.push_back({WireKind::Dga, std::string(kEndJsonMarker) + "\n" + inner(good) + "\n" + std::string(kStartJsonMarker),
                 ErrorCode::EndBeforeStart, "dga markers reversed"});
  out.push_back({WireKind::Dga, std::string(kStartJsonMarker) + "\n{\"explicit_dimensions\": [,]}\n" +
                                    std::string(kEndJsonMarker),
                 ErrorCode::InvalidJson, "dga broken json"});

  const std::string body = "A revised answer.";
  out.push_back({WireKind::Rga, body + "\n" + std::string(kEndMarker), ErrorCode::MissingStartMarker, "rga no start"});
  out.push_back({WireKind::Rga, std::string(kStartMarker) + "\n" + body, ErrorCode::MissingEndMarker, "rga no end"});
  out.push_back({WireKind::Rga, std::string(kEndMarker) + "\n" + body + "\n" + std::string(kStartMarker),
                 ErrorCode::EndBeforeStart, "rga reversed"});
  out.push_back({WireKind::Rga, "", ErrorCode::MissingStartMarker, "rga empty"});

  auto judge = [&](const std::function<void(nlohmann::ordered_json&)>& mutate, ErrorCode code, std::string label) {
    auto j = nlohmann::ordered_json::parse(
        format_judge_json({static_cast<int>(rng() % 6), static_cast<int>(rng() % 6), "fine", "thin"}));
    mutate(j);
    out.push_back({WireKind::Judge, j.dump(2), code, std::move(label)});
  };
  judge([](auto& j) { j["response_A_score"] = 6; }, ErrorCode::ScoreOutOfRange, "judge score 6");
  judge([](auto& j) { j["response_B_score"] = -1; }, ErrorCode::ScoreOutOfRange, "judge score -1");
  judge([](auto& j) { j["response_A_score"] = "4"; }, ErrorCode::TypeMismatch, "judge string score");
  judge([](auto& j) { j["response_B_score"] = 3.5; }, ErrorCode::TypeMismatch, "judge fractional score");
  judge([](auto& j) { j.erase("response_B_justification"); }, ErrorCode::MissingKey, "judge missing justification");
  judge([](auto& j) { j.erase("response_A_score"); }, ErrorCode::MissingKey, "judge missing score");
  judge([](auto& j) { j["winner"] = "A"; }, ErrorCode::ExtraField, "judge extra field");
  judge([](auto& j) { j["response_A_justification"] = " "; }, ErrorCode::EmptyValue, "judge blank justification");
  judge([](auto& j) { j["response_B_justification"] = nullptr; }, ErrorCode::TypeMismatch, "judge null justification");
  out.push_back({WireKind::Judge, "{\"response_A_score\": 3,", ErrorCode::InvalidJson, "judge truncated"});
  out.push_back({WireKind::Judge, "[1, 2]", ErrorCode::TypeMismatch, "judge array"});
  out.push_back({WireKind::Judge, "Score A: 4", ErrorCode::InvalidJson, "judge prose"});
  return out;
}

}  // namespace proper::testing
