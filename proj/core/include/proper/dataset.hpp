#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/agents.hpp"
#include "proper/dimensions.hpp"

namespace proper {

// Language code of Python 3 in the CodeContests dumps.
inline constexpr int kPython3Language = 3;
inline constexpr std::size_t kMaxSolutionsPerProblem = 50;
inline constexpr std::size_t kWarmPerDifficulty = 15;
inline constexpr std::size_t kMaxFinetuneTokens = 3248;
inline constexpr std::size_t kExpectedMdRecords = 280;

struct CodeProblem {
  std::string id;  // hex hash of (name, description)
  std::string name;
  std::string description;
  int difficulty = 0;
  std::vector<std::string> solutions;  // Python 3 only, dump order
};

struct IngestStats {
  std::size_t records = 0;  // before filtering
  std::size_t kept = 0;
  std::size_t dropped_no_solutions = 0;
  std::size_t capped = 0;
  std::vector<std::string> warnings;
};

// Reads every *.jsonl file of a dump directory in filename order (or a single
// file). Each line: {"name","description","difficulty",
// "solutions":{"language":[int],"solution":[string]}}. Garbled input throws
// Ingestion naming the file, line and record index.
std::vector<CodeProblem> load_codecontests(const std::filesystem::path& dump, IngestStats* stats = nullptr);

// Uniform integer in [0, bound) by rejection sampling on raw mt19937_64
// output, so results do not depend on the standard library's distributions.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

// Fisher-Yates over `items` driven by uniform_below.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

// Independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct WarmColdSplit {
  std::vector<CodeProblem> warm;
  std::vector<CodeProblem> cold;
};

// Per difficulty: sort by id, shuffle, first min(15, count) go warm.
WarmColdSplit split_warm_cold(const std::vector<CodeProblem>& problems, std::uint64_t seed);

// Sort by id, shuffle, first floor(0.7 n) go to the first half.
std::pair<std::vector<std::string>, std::vector<std::string>> split_ids_70_30(std::vector<std::string> ids,
                                                                              std::uint64_t seed);

template <typename T, typename IdOf>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& items, std::uint64_t seed,
                                                           IdOf id_of) {
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (const auto& it : items) ids.push_back(id_of(it));
  auto [train_ids, test_ids] = split_ids_70_30(std::move(ids), seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  auto pick = [&](const std::vector<std::string>& wanted, std::vector<T>& dst) {
    for (const auto& id : wanted) {
      for (const auto& it : items) {
        if (id_of(it) == id) {
          dst.push_back(it);
          break;
        }
      }
    }
  };
  pick(train_ids, out.first);
  pick(test_ids, out.second);
  return out;
}

inline std::pair<std::vector<CodeProblem>, std::vector<CodeProblem>> split_train_test(
    const std::vector<CodeProblem>& warm, std::uint64_t seed) {
  return split_train_test(warm, seed, [](const CodeProblem& p) { return p.id; });
}

// One id per line, sorted, trailing newline.
std::string membership_file(std::vector<std::string> ids);

struct ElicitedQuery {
  std::string problem_id;
  int level = 1;
  std::string text;
};

nlohmann::json to_json(const ElicitedQuery& q);

ElicitedQuery elicit_query(const Agents& agents, const CodeProblem& problem, int level,
                           StageLog* log = nullptr);

struct AnnotationRecord {
  std::string id;
  Domain domain = Domain::Medical;
  AnnotationInputs inputs;
  std::vector<Turn> history;
  AspectPayload aspects;
};

nlohmann::json to_json(const AnnotationRecord& r);

AnnotationRecord annotate_interaction(const Agents& agents, const std::string& id, Domain domain,
                                      const AnnotationInputs& inputs, StageLog* log = nullptr);

struct MdRecord {
  std::string id;
  std::string patient_query;
  std::string doctor_response;
};

// JSON lines {"id"?, "patient_query", "doctor_response"}. Records missing a
// field are skipped with a warning; a count other than 280 only warns.
std::vector<MdRecord> load_md(const std::filesystem::path& path, IngestStats* stats = nullptr);

struct PwabRecord {
  std::string id;
  std::string user_id;
  Persona persona;
  std::string query;
  // Product attributes in file order, e.g. ("Title", ...), ("Average Rating", "4.6").
  std::vector<std::pair<std::string, std::string>> product;
};

// "Title: ...; Category: ...; ..."
std::string format_product(const PwabRecord& r);

// JSON lines of two kinds, linked by user_id:
//   {"type":"profile","user_id":U,"persona":{...}}
//   {"type":"instruction","user_id":U,"id"?,"query":Q,"product":{...}}
// Instructions without a profile are skipped with a warning.
std::vector<PwabRecord> load_pwab(const std::filesystem::path& path, IngestStats* stats = nullptr);

struct FinetuneSource {
  std::string id;
  Domain domain = Domain::Medical;
  std::string query;
  std::vector<Turn> history;
  std::optional<Persona> persona;
  AspectPayload aspects;
};

struct FinetuneExample {
  std::string id;
  std::string instruction;
  std::string input;
  std::string output;
  std::size_t token_estimate = 0;
  bool truncated = false;
};

nlohmann::json to_json(const FinetuneExample& e);

// ceil(1.3 * whitespace word count)
std::size_t estimate_tokens(std::string_view text);

// Builds one example. Over-long inputs lose history turns first (oldest
// first), then words from the longest non-query segment, then query words,
// then trailing output aspects.
FinetuneExample make_finetune_example(const FinetuneSource& src, std::size_t max_tokens = kMaxFinetuneTokens);

enum class TemplateStyle { Llama3, Qwen };

std::string_view to_string(TemplateStyle s);
TemplateStyle template_style_from_string(std::string_view s);

// LoRA SFT hyperparameters for the DGA fine-tune.
nlohmann::json training_manifest(TemplateStyle style, const std::string& dataset_file, std::size_t examples);

// Writes <out>/finetune.jsonl and <out>/training_manifest.json.
std::vector<FinetuneExample> emit_finetune(const std::vector<FinetuneSource>& records, TemplateStyle style,
                                           const std::filesystem::path& out_dir);

}  // namespace proper
