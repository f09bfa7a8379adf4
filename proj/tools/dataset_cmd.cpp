#include <spdlog/spdlog.h>

#include <atomic>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "commands.hpp"
#include "common.hpp"
#include "proper/dataset.hpp"

namespace proper::cli {

namespace {

namespace fs = std::filesystem;

struct Job {
  std::string id;
  AnnotationInputs inputs;
  bool train = false;
};

nlohmann::json stats_json(const IngestStats& st) {
  return {{"records", st.records},
          {"kept", st.kept},
          {"dropped_no_solutions", st.dropped_no_solutions},
          {"capped", st.capped},
          {"warnings", st.warnings}};
}

std::string jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

void write_splits(const fs::path& dir, const std::map<std::string, std::vector<std::string>>& splits) {
  ensure_dir(dir);
  for (const auto& [name, ids] : splits) write_text(dir / (name + ".txt"), membership_file(ids));
}

// Annotates every job and emits annotations.jsonl plus the fine-tune files
// built from the training jobs. Returns the number of failed jobs.
std::size_t annotate_and_emit(const Agents& agents, Domain domain, const std::vector<Job>& jobs, int workers,
                              TemplateStyle style, const fs::path& out, std::vector<nlohmann::json>& errors) {
  std::vector<std::optional<AnnotationRecord>> done(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<bool> stop{false};
  run_parallel(jobs.size(), workers, stop, [&](std::size_t i) {
    try {
      done[i] = annotate_interaction(agents, jobs[i].id, domain, jobs[i].inputs);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  std::vector<nlohmann::json> rows;
  std::vector<FinetuneSource> sources;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!done[i]) {
      ++failed;
      errors.push_back({{"id", jobs[i].id},
                        {"stage", "annotate"},
                        {"error", failures[i].empty() ? "not run" : failures[i]}});
      continue;
    }
    auto row = to_json(*done[i]);
    row["split"] = jobs[i].train ? "train" : "test";
    rows.push_back(std::move(row));
    if (jobs[i].train) {
      FinetuneSource src;
      src.id = done[i]->id;
      src.domain = domain;
      src.query = done[i]->inputs.query;
      src.history = done[i]->history;
      src.persona = done[i]->inputs.persona;
      src.aspects = done[i]->aspects;
      sources.push_back(std::move(src));
    }
  }
  write_text(out / "annotations.jsonl", jsonl(rows));
  const auto examples = emit_finetune(sources, style, out / "finetune");
  spdlog::info("{} annotations, {} fine-tune examples", rows.size(), examples.size());
  return failed;
}

int build_codecontests(const DatasetOptions& o, const Agents* agents, int workers, TemplateStyle style,
                       std::vector<nlohmann::json>& errors) {
  const fs::path out(o.out);
  IngestStats stats;
  const auto problems = load_codecontests(o.dump, &stats);
  const auto split = split_warm_cold(problems, o.seed);
  const auto [train, test] = split_train_test(split.warm, o.seed);

  auto ids_of = [](const std::vector<CodeProblem>& v) {
    std::vector<std::string> ids;
    for (const auto& p : v) ids.push_back(p.id);
    return ids;
  };
  write_splits(out / "splits", {{"warm", ids_of(split.warm)},
                                {"cold", ids_of(split.cold)},
                                {"train", ids_of(train)},
                                {"test", ids_of(test)}});

  std::map<int, std::pair<std::size_t, std::size_t>> per_difficulty;
  for (const auto& p : split.warm) ++per_difficulty[p.difficulty].first;
  for (const auto& p : split.cold) ++per_difficulty[p.difficulty].second;
  auto st = stats_json(stats);
  nlohmann::json pd = nlohmann::json::object();
  for (const auto& [d, c] : per_difficulty) pd[std::to_string(d)] = {{"warm", c.first}, {"cold", c.second}};
  st["per_difficulty"] = std::move(pd);
  st["seed"] = o.seed;
  write_json(out / "ingest_stats.json", st);

  std::vector<nlohmann::json> rows;
  for (const auto& p : problems) {
    rows.push_back({{"id", p.id}, {"name", p.name}, {"difficulty", p.difficulty}, {"solutions", p.solutions.size()}});
  }
  write_text(out / "problems.jsonl", jsonl(rows));
  std::cout << "codecontests: " << stats.kept << " problems kept of " << stats.records << ", warm "
            << split.warm.size() << " (train " << train.size() << ", test " << test.size() << "), cold "
            << split.cold.size() << "\n";
  if (!agents) return 0;

  // Three elicitation levels per warm problem.
  std::vector<std::pair<const CodeProblem*, bool>> warm;
  for (const auto& p : train) warm.emplace_back(&p, true);
  for (const auto& p : test) warm.emplace_back(&p, false);
  std::vector<std::optional<ElicitedQuery>> queries(warm.size() * 3);
  std::vector<std::string> failures(queries.size());
  std::atomic<bool> stop{false};
  run_parallel(queries.size(), workers, stop, [&](std::size_t i) {
    try {
      queries[i] = elicit_query(*agents, *warm[i / 3].first, static_cast<int>(i % 3) + 1);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  std::vector<nlohmann::json> elicited;
  std::vector<Job> jobs;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& problem = *warm[i / 3].first;
    const int level = static_cast<int>(i % 3) + 1;
    const auto id = problem.id + "-L" + std::to_string(level);
    if (!queries[i]) {
      ++failed;
      errors.push_back({{"id", id}, {"stage", "elicit"}, {"error", failures[i].empty() ? "not run" : failures[i]}});
      continue;
    }
    elicited.push_back(to_json(*queries[i]));
    jobs.push_back({id, {queries[i]->text, problem.solutions.front(), std::nullopt}, warm[i / 3].second});
  }
  write_text(out / "elicited.jsonl", jsonl(elicited));
  return static_cast<int>(failed +
                          annotate_and_emit(*agents, Domain::Coding, jobs, workers, style, out, errors));
}

int build_md(const DatasetOptions& o, const Agents* agents, int workers, TemplateStyle style,
             std::vector<nlohmann::json>& errors) {
  const fs::path out(o.out);
  IngestStats stats;
  const auto records = load_md(o.dump, &stats);
  if (records.empty()) fail(ErrorCode::Ingestion, "no usable MD records in " + o.dump);
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    fail(ErrorCode::Ingestion, "duplicate MD record ids in " + o.dump);
  }
  const auto [train, test] = split_ids_70_30(ids, o.seed);
  write_splits(out / "splits", {{"train", train}, {"test", test}});
  auto st = stats_json(stats);
  st["seed"] = o.seed;
  write_json(out / "ingest_stats.json", st);
  std::cout << "md: " << records.size() << " records, train " << train.size() << ", test " << test.size() << "\n";
  if (!agents) return 0;

  const std::set<std::string> train_ids(train.begin(), train.end());
  std::vector<Job> jobs;
  for (const auto& r : records) {
    jobs.push_back({r.id, {r.patient_query, r.doctor_response, std::nullopt}, train_ids.count(r.id) > 0});
  }
  return static_cast<int>(annotate_and_emit(*agents, Domain::Medical, jobs, workers, style, out, errors));
}

int build_pwab(const DatasetOptions& o, const Agents* agents, int workers, TemplateStyle style,
               std::vector<nlohmann::json>& errors) {
  const fs::path out(o.out);
  IngestStats stats;
  const auto records = load_pwab(o.dump, &stats);
  if (records.empty()) fail(ErrorCode::Ingestion, "no usable PWAB instructions in " + o.dump);
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    fail(ErrorCode::Ingestion, "duplicate PWAB instruction ids in " + o.dump);
  }
  const auto [train, test] = split_ids_70_30(ids, o.seed);
  write_splits(out / "splits", {{"train", train}, {"test", test}});
  auto st = stats_json(stats);
  st["seed"] = o.seed;
  write_json(out / "ingest_stats.json", st);
  std::cout << "pwab: " << records.size() << " instructions, train " << train.size() << ", test " << test.size()
            << "\n";
  if (!agents) return 0;

  const std::set<std::string> train_ids(train.begin(), train.end());
  std::vector<Job> jobs;
  for (const auto& r : records) {
    jobs.push_back({r.id, {r.query, format_product(r), r.persona}, train_ids.count(r.id) > 0});
  }
  return static_cast<int>(annotate_and_emit(*agents, Domain::Recommendation, jobs, workers, style, out, errors));
}

}  // namespace

int run_dataset_build(const DatasetOptions& o) {
  const auto domain = domain_from_string(o.dataset);
  const auto style = template_style_from_string(o.template_style);
  std::optional<RunConfig> cfg;
  std::optional<Agents> agents;
  if (!o.splits_only) {
    cfg = load_config_logged(o.config);
    agents.emplace(make_chat_provider(*cfg), make_embedder(*cfg), cfg->agent);
  }
  ensure_dir(o.out);
  const int workers = cfg ? cfg->workers : 1;
  const Agents* a = agents ? &*agents : nullptr;

  std::vector<nlohmann::json> errors;
  int failed = 0;
  switch (domain) {
    case Domain::Coding: failed = build_codecontests(o, a, workers, style, errors); break;
    case Domain::Medical: failed = build_md(o, a, workers, style, errors); break;
    case Domain::Recommendation: failed = build_pwab(o, a, workers, style, errors); break;
  }
  if (!errors.empty()) {
    write_text(std::filesystem::path(o.out) / "errors.jsonl", jsonl(errors));
    for (const auto& e : errors) spdlog::error("{} {}: {}", e["stage"].get<std::string>(), e["id"].get<std::string>(),
                                               e["error"].get<std::string>());
  }
  if (interrupted()) return kPartial;
  return failed > 0 ? kPartial : kOk;
}

}  // namespace proper::cli
