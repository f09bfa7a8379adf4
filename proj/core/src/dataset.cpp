#include "proper/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "proper/prompts.hpp"
#include "proper/text.hpp"

namespace proper {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void ingest_fail(const fs::path& file, std::size_t line, std::size_t record, const std::string& what) {
  Error e(ErrorCode::Ingestion, file.string() + ":" + std::to_string(line) + " (record " + std::to_string(record) +
                                    "): " + what);
  e.with_path(file.string());
  throw e;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) fail(ErrorCode::Io, "read error on " + path.string());
  return lines;
}

std::string scalar_text(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& el : v) parts.push_back(scalar_text(el));
    return text::join(parts, ", ");
  }
  return v.dump();
}

std::string id_text(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  return {};
}

std::string truncate_words(std::string_view s, std::size_t keep) {
  const auto w = text::words(s);
  std::string out;
  for (std::size_t i = 0; i < std::min(keep, w.size()); ++i) {
    if (i > 0) out += ' ';
    out += w[i];
  }
  return out;
}

}  // namespace

std::vector<CodeProblem> load_codecontests(const fs::path& dump, IngestStats* stats) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;

  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(dump, ec)) {
    for (const auto& entry : fs::directory_iterator(dump, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    if (ec) fail(ErrorCode::Io, "cannot list " + dump.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(dump, ec)) {
    files.push_back(dump);
  } else {
    fail(ErrorCode::Io, "dump path " + dump.string() + " is not readable");
  }
  if (files.empty()) fail(ErrorCode::Ingestion, "no .jsonl files under " + dump.string());

  std::vector<CodeProblem> out;
  std::set<std::string> seen;
  for (const auto& file : files) {
    const auto lines = read_lines(file);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (text::is_blank(lines[ln])) continue;
      const std::size_t record = st.records++;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(lines[ln]);
      } catch (const nlohmann::json::parse_error& e) {
        ingest_fail(file, ln + 1, record, std::string("garbled JSON: ") + e.what());
      }
      if (!j.is_object()) ingest_fail(file, ln + 1, record, "record is not an object");
      if (!j.contains("description") || !j["description"].is_string()) {
        ingest_fail(file, ln + 1, record, "missing string \"description\"");
      }
      if (!j.contains("difficulty") || !j["difficulty"].is_number_integer()) {
        ingest_fail(file, ln + 1, record, "missing integer \"difficulty\"");
      }
      const auto& sol = j.value("solutions", nlohmann::json::object());
      if (!sol.is_object() || !sol.contains("language") || !sol.contains("solution") ||
          !sol["language"].is_array() || !sol["solution"].is_array() ||
          sol["language"].size() != sol["solution"].size()) {
        ingest_fail(file, ln + 1, record, "\"solutions\" needs parallel \"language\" and \"solution\" arrays");
      }

      CodeProblem p;
      p.name = j.value("name", std::string());
      p.description = j["description"].get<std::string>();
      p.difficulty = j["difficulty"].get<int>();
      p.id = text::hex64(text::fnv1a64(p.name + '\x1f' + p.description));
      std::size_t python = 0;
      for (std::size_t i = 0; i < sol["language"].size(); ++i) {
        const auto& lang = sol["language"][i];
        const auto& src = sol["solution"][i];
        if (!lang.is_number_integer() || !src.is_string()) {
          ingest_fail(file, ln + 1, record, "solution " + std::to_string(i) + " is malformed");
        }
        if (lang.get<int>() != kPython3Language) continue;
        ++python;
        if (p.solutions.size() < kMaxSolutionsPerProblem) p.solutions.push_back(src.get<std::string>());
      }
      if (python > kMaxSolutionsPerProblem) ++st.capped;
      if (p.solutions.empty()) {
        ++st.dropped_no_solutions;
        continue;
      }
      if (!seen.insert(p.id).second) {
        st.warnings.push_back("duplicate problem " + p.id + " at record " + std::to_string(record) + " skipped");
        continue;
      }
      out.push_back(std::move(p));
    }
  }
  st.kept = out.size();
  return out;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) fail(ErrorCode::InvalidInput, "uniform_below needs a positive bound");
  // 2^64 mod bound; values below it would bias the modulo.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

WarmColdSplit split_warm_cold(const std::vector<CodeProblem>& problems, std::uint64_t seed) {
  if (problems.empty()) fail(ErrorCode::InvalidInput, "cannot split an empty problem set");
  std::map<int, std::vector<CodeProblem>> by_difficulty;
  for (const auto& p : problems) by_difficulty[p.difficulty].push_back(p);

  WarmColdSplit out;
  for (auto& [difficulty, group] : by_difficulty) {
    std::sort(group.begin(), group.end(), [](const CodeProblem& a, const CodeProblem& b) { return a.id < b.id; });
    seeded_shuffle(group, derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(difficulty))));
    const auto warm = std::min(kWarmPerDifficulty, group.size());
    out.warm.insert(out.warm.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(warm));
    out.cold.insert(out.cold.end(), group.begin() + static_cast<std::ptrdiff_t>(warm), group.end());
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_ids_70_30(std::vector<std::string> ids,
                                                                              std::uint64_t seed) {
  if (ids.empty()) fail(ErrorCode::InvalidInput, "cannot split an empty set");
  std::sort(ids.begin(), ids.end());
  seeded_shuffle(ids, derive_seed(seed, 0x7030));
  const std::size_t cut = ids.size() * 7 / 10;
  std::vector<std::string> first(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<std::string> second(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
  return {std::move(first), std::move(second)};
}

std::string membership_file(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (const auto& id : ids) out += id + "\n";
  return out;
}

nlohmann::json to_json(const ElicitedQuery& q) {
  return {{"problem_id", q.problem_id}, {"level", q.level}, {"text", q.text}};
}

ElicitedQuery elicit_query(const Agents& agents, const CodeProblem& problem, int level, StageLog* log) {
  const auto tpl = elicit_template(level);
  const auto prompt = render(tpl, {{"<problem description>", problem.description}});
  const auto& cfg = agents.config();
  ElicitedQuery q;
  q.problem_id = problem.id;
  q.level = level;
  q.text = agents.complete_text("elicit-L" + std::to_string(level), cfg.models.annotate,
                                cfg.temperatures.annotate, prompt, log);
  return q;
}

nlohmann::json to_json(const AnnotationRecord& r) {
  auto dims = [](const std::vector<Dimension>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& d : v) arr.push_back(to_wire_json(d));
    return arr;
  };
  nlohmann::json inputs = {{"query", r.inputs.query}, {"response", r.inputs.response}};
  if (r.inputs.persona) {
    auto p = nlohmann::json::array();
    for (const auto& [k, v] : *r.inputs.persona) p.push_back({k, v});
    inputs["persona"] = std::move(p);
  }
  return {{"id", r.id},
          {"domain", std::string(to_string(r.domain))},
          {"inputs", std::move(inputs)},
          {"user_aspects", dims(r.aspects.user_aspects)},
          {"solution_aspects", dims(r.aspects.solution_aspects)}};
}

AnnotationRecord annotate_interaction(const Agents& agents, const std::string& id, Domain domain,
                                      const AnnotationInputs& inputs, StageLog* log) {
  if (domain == Domain::Recommendation && (!inputs.persona || inputs.persona->empty())) {
    fail(ErrorCode::InvalidInput, "recommendation annotation needs a persona");
  }
  AnnotationRecord r;
  r.id = id;
  r.domain = domain;
  r.inputs = inputs;
  r.aspects = agents.annotate(domain, inputs, log);
  return r;
}

std::vector<MdRecord> load_md(const fs::path& path, IngestStats* stats) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  const auto lines = read_lines(path);
  std::vector<MdRecord> out;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::is_blank(lines[ln])) continue;
    const std::size_t record = st.records++;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[ln]);
    } catch (const nlohmann::json::parse_error& e) {
      ingest_fail(path, ln + 1, record, std::string("garbled JSON: ") + e.what());
    }
    auto field = [&](const char* key) -> std::string {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string()) return {};
      return j[key].get<std::string>();
    };
    MdRecord r;
    r.id = j.is_object() && j.contains("id") ? id_text(j["id"]) : "";
    if (r.id.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "md-%04zu", record);
      r.id = buf;
    }
    r.patient_query = field("patient_query");
    r.doctor_response = field("doctor_response");
    if (text::is_blank(r.patient_query) || text::is_blank(r.doctor_response)) {
      st.warnings.push_back("record " + std::to_string(record) + " (" + r.id +
                            ") lacks a patient query or doctor response; skipped");
      continue;
    }
    out.push_back(std::move(r));
  }
  if (out.size() != kExpectedMdRecords) {
    st.warnings.push_back("loaded " + std::to_string(out.size()) + " MD records, expected " +
                          std::to_string(kExpectedMdRecords));
  }
  st.kept = out.size();
  for (const auto& w : st.warnings) spdlog::warn("{}: {}", path.string(), w);
  return out;
}

std::string format_product(const PwabRecord& r) {
  std::vector<std::string> parts;
  for (const auto& [k, v] : r.product) parts.push_back(k + ": " + v);
  return text::join(parts, "; ");
}

std::vector<PwabRecord> load_pwab(const fs::path& path, IngestStats* stats) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  const auto lines = read_lines(path);

  struct Pending {
    std::size_t record;
    nlohmann::ordered_json j;
  };
  std::map<std::string, Persona> profiles;
  std::vector<Pending> instructions;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::is_blank(lines[ln])) continue;
    const std::size_t record = st.records++;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(lines[ln]);
    } catch (const nlohmann::json::parse_error& e) {
      ingest_fail(path, ln + 1, record, std::string("garbled JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
      ingest_fail(path, ln + 1, record, "record needs a string \"type\"");
    }
    const auto type = j["type"].get<std::string>();
    const auto user = j.contains("user_id") ? id_text(j["user_id"]) : "";
    if (user.empty()) {
      st.warnings.push_back("record " + std::to_string(record) + " has no user_id; skipped");
      continue;
    }
    if (type == "profile") {
      if (!j.contains("persona") || !j["persona"].is_object()) {
        ingest_fail(path, ln + 1, record, "profile needs a \"persona\" object");
      }
      Persona persona;
      for (const auto& [k, v] : j["persona"].items()) {
        if (v.is_null()) continue;
        persona.emplace_back(k, scalar_text(v));
      }
      if (!profiles.emplace(user, std::move(persona)).second) {
        st.warnings.push_back("duplicate profile for user " + user + "; keeping the first");
      }
    } else if (type == "instruction") {
      instructions.push_back({record, std::move(j)});
    } else {
      st.warnings.push_back("record " + std::to_string(record) + " has unknown type '" + type + "'; skipped");
    }
  }

  std::vector<PwabRecord> out;
  for (const auto& [record, j] : instructions) {
    const auto user = id_text(j["user_id"]);
    const auto it = profiles.find(user);
    if (it == profiles.end()) {
      st.warnings.push_back("instruction " + std::to_string(record) + " references unknown user " + user +
                            "; skipped");
      continue;
    }
    if (!j.contains("query") || !j["query"].is_string() || text::is_blank(j["query"].get<std::string>())) {
      st.warnings.push_back("instruction " + std::to_string(record) + " has no query; skipped");
      continue;
    }
    PwabRecord r;
    r.id = j.contains("id") ? id_text(j["id"]) : "";
    if (r.id.empty()) r.id = "pwab-" + std::to_string(record);
    r.user_id = user;
    r.persona = it->second;
    r.query = j["query"].get<std::string>();
    if (j.contains("product") && j["product"].is_object()) {
      for (const auto& [k, v] : j["product"].items()) {
        if (!v.is_null()) r.product.emplace_back(k, scalar_text(v));
      }
    }
    out.push_back(std::move(r));
  }
  st.kept = out.size();
  for (const auto& w : st.warnings) spdlog::warn("{}: {}", path.string(), w);
  return out;
}

nlohmann::json to_json(const FinetuneExample& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["instruction"] = e.instruction;
  j["input"] = e.input;
  j["output"] = e.output;
  j["token_estimate"] = e.token_estimate;
  j["truncated"] = e.truncated;
  return nlohmann::json::parse(j.dump());
}

std::size_t estimate_tokens(std::string_view s) { return (text::words(s).size() * 13 + 9) / 10; }

FinetuneExample make_finetune_example(const FinetuneSource& src, std::size_t max_tokens) {
  const auto tpl = dga_template(src.domain);
  PromptValues slots;
  for (auto token : prompt_template(tpl).placeholders) slots[std::string(token)] = "[see input]";

  FinetuneExample ex;
  ex.id = src.id;
  ex.instruction = render(tpl, slots);

  std::string persona = src.persona && !src.persona->empty() ? format_persona(*src.persona) : "";
  std::vector<Turn> history = src.history;
  std::string query = src.query;
  DimensionPayload payload;
  payload.explicit_dims = src.aspects.user_aspects;
  for (const auto& d : src.aspects.solution_aspects) payload.missed.push_back(d.with_origin(Origin::Implicit));

  auto build_input = [&] {
    std::vector<std::string> lines;
    if (!persona.empty()) lines.push_back("User persona: " + persona);
    for (const auto& t : history) lines.push_back((t.role == Role::User ? "User: " : "Assistant: ") + t.text);
    lines.push_back("User query: " + query);
    return text::join(lines, "\n");
  };
  auto total = [&] {
    return text::words(ex.instruction).size() + text::words(build_input()).size() +
           text::words(format_dimension_output(payload)).size();
  };
  // ceil(1.3 w) <= max  <=>  13 w <= 10 max
  const std::size_t word_budget = max_tokens * 10 / 13;

  while (total() > word_budget && !history.empty()) {
    history.erase(history.begin());
    ex.truncated = true;
  }
  if (total() > word_budget && !persona.empty()) {
    const auto excess = total() - word_budget;
    const auto have = text::words(persona).size();
    persona = excess >= have ? "" : truncate_words(persona, have - excess);
    ex.truncated = true;
  }
  if (total() > word_budget) {
    const auto excess = total() - word_budget;
    const auto have = text::words(query).size();
    // keep at least one word of the query
    query = truncate_words(query, excess >= have ? 1 : have - excess);
    ex.truncated = true;
  }
  while (total() > word_budget && !payload.missed.empty()) {
    payload.missed.pop_back();
    ex.truncated = true;
  }
  while (total() > word_budget && !payload.explicit_dims.empty()) {
    payload.explicit_dims.pop_back();
    ex.truncated = true;
  }
  if (total() > word_budget) {
    fail(ErrorCode::InvalidState, "finetune example " + src.id + " cannot fit " + std::to_string(max_tokens) +
                                      " tokens");
  }

  ex.input = build_input();
  ex.output = format_dimension_output(payload);
  ex.token_estimate = estimate_tokens(ex.instruction + "\n" + ex.input + "\n" + ex.output);
  return ex;
}

std::string_view to_string(TemplateStyle s) { return s == TemplateStyle::Llama3 ? "llama3" : "qwen"; }

TemplateStyle template_style_from_string(std::string_view s) {
  if (s == "llama3") return TemplateStyle::Llama3;
  if (s == "qwen") return TemplateStyle::Qwen;
  fail(ErrorCode::Configuration, "unknown template style '" + std::string(s) + "'");
}

nlohmann::json training_manifest(TemplateStyle style, const std::string& dataset_file, std::size_t examples) {
  nlohmann::ordered_json j;
  j["manifest_version"] = 1;
  j["framework"] = "LLaMA-Factory";
  j["stage"] = "sft";
  j["finetuning_type"] = "lora";
  j["lora_rank"] = 8;
  j["lora_target"] = "all";
  j["template"] = std::string(to_string(style));
  j["cutoff_len"] = kMaxFinetuneTokens;
  j["preprocessing_num_workers"] = 16;
  j["num_train_epochs"] = 7;
  j["lr_scheduler_type"] = "cosine";
  j["warmup_ratio"] = 0.1;
  j["learning_rate"] = 1e-4;
  j["per_device_train_batch_size"] = 1;
  j["gradient_accumulation_steps"] = 8;
  j["effective_batch_size"] = 8;
  j["bf16"] = true;
  j["eval_steps"] = 500;
  j["dataset_file"] = dataset_file;
  j["dataset_format"] = "alpaca";
  j["num_examples"] = examples;
  return nlohmann::json::parse(j.dump());
}

std::vector<FinetuneExample> emit_finetune(const std::vector<FinetuneSource>& records, TemplateStyle style,
                                           const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<FinetuneExample> examples;
  std::string lines;
  for (const auto& r : records) {
    examples.push_back(make_finetune_example(r));
    nlohmann::ordered_json j;
    const auto& e = examples.back();
    j["id"] = e.id;
    j["instruction"] = e.instruction;
    j["input"] = e.input;
    j["output"] = e.output;
    j["token_estimate"] = e.token_estimate;
    j["truncated"] = e.truncated;
    lines += j.dump() + "\n";
  }
  text::atomic_write_file(out_dir / "finetune.jsonl", lines);
  nlohmann::ordered_json manifest = nlohmann::ordered_json::parse(
      training_manifest(style, "finetune.jsonl", examples.size()).dump());
  text::atomic_write_file(out_dir / "training_manifest.json", manifest.dump(2) + "\n");
  return examples;
}

}  // namespace proper
