#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <iostream>

#include "commands.hpp"
#include "common.hpp"
#include "proper/eval.hpp"
#include "proper/text.hpp"

namespace proper::cli {

namespace {

namespace fs = std::filesystem;

struct PairInput {
  std::string id;
  std::string dataset;
  std::string query;
  std::string response_a;
  std::string response_b;
  std::string error;  // set when the input itself is unusable
};

std::string str_field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    fail(ErrorCode::InvalidInput, std::string("missing string \"") + key + "\"");
  }
  return j[key].get<std::string>();
}

std::vector<PairInput> pairs_from_jsonl(const std::string& path) {
  std::vector<PairInput> out;
  for (const auto& line : read_jsonl(path)) {
    PairInput p;
    p.id = "line-" + std::to_string(line.line);
    p.dataset = "unknown";
    if (!line.error.empty()) {
      p.error = "invalid JSON: " + line.error;
      out.push_back(std::move(p));
      continue;
    }
    try {
      p.id = str_field(line.value, "id");
      p.dataset = line.value.contains("dataset") ? str_field(line.value, "dataset") : "default";
      p.query = str_field(line.value, "query");
      p.response_a = str_field(line.value, "response_a");
      p.response_b = str_field(line.value, "response_b");
    } catch (const Error& e) {
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

// Pairs up <id>.trace.json files present in both directories.
std::vector<PairInput> pairs_from_traces(const std::string& dir_a, const std::string& dir_b) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 11 && name.ends_with(".trace.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PairInput> out;
  for (const auto& fa : files) {
    const auto fb = fs::path(dir_b) / fa.filename();
    PairInput p;
    p.id = fa.filename().string();
    p.dataset = "unknown";
    if (!fs::exists(fb)) {
      spdlog::warn("{} has no counterpart in {}; skipped", p.id, dir_b);
      continue;
    }
    try {
      const auto ja = nlohmann::json::parse(text::read_file(fa));
      const auto jb = nlohmann::json::parse(text::read_file(fb));
      const auto state = interaction_state_from_json(ja.at("state"));
      p.id = ja.at("sample_id").get<std::string>();
      p.dataset = ja.contains("dataset") ? ja["dataset"].get<std::string>() : std::string(dataset_label(state.domain));
      p.query = query_block(state, state.domain == Domain::Recommendation);
      p.response_a = str_field(ja, "final_response");
      p.response_b = str_field(jb, "final_response");
    } catch (const std::exception& e) {
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<LambdaPreset> parse_presets(const std::string& list) {
  if (list == "paper" || list == "reference") return reference_presets();
  std::vector<LambdaPreset> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto end = std::min(list.find(';', start), list.size());
    const std::string item(text::trim(std::string_view(list).substr(start, end - start)));
    start = end + 1;
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) {
      out.push_back(preset_by_name(item));
      continue;
    }
    LambdaPreset p;
    try {
      std::size_t used = 0;
      const auto l1 = item.substr(0, comma);
      const auto l2 = item.substr(comma + 1);
      p.lambda1 = std::stod(l1, &used);
      if (used != l1.size()) throw std::invalid_argument(l1);
      p.lambda2 = std::stod(l2, &used);
      if (used != l2.size()) throw std::invalid_argument(l2);
    } catch (const std::exception&) {
      fail(ErrorCode::Configuration, "cannot parse lambda pair '" + item + "'");
    }
    p.name = p.label();
    out.push_back(std::move(p));
  }
  if (out.empty()) fail(ErrorCode::Configuration, "no presets given");
  return out;
}

void emit(const fs::path& out, const std::string& stem, const nlohmann::json& report, const std::string& table) {
  ensure_dir(out);
  write_json(out / (stem + ".json"), report);
  write_text(out / (stem + ".txt"), table);
  std::cout << table;
}

}  // namespace

int run_eval_pairwise(const EvalOptions& o) {
  const bool from_traces = !o.traces_a.empty() || !o.traces_b.empty();
  if (from_traces == !o.input.empty()) {
    fail(ErrorCode::InvalidInput, "give either --input or both --traces-a and --traces-b");
  }
  if (from_traces && (o.traces_a.empty() || o.traces_b.empty())) {
    fail(ErrorCode::InvalidInput, "--traces-a and --traces-b go together");
  }
  const auto cfg = load_config_logged(o.config);
  const auto pairs = from_traces ? pairs_from_traces(o.traces_a, o.traces_b) : pairs_from_jsonl(o.input);
  if (pairs.empty()) fail(ErrorCode::InvalidInput, "nothing to judge");

  const Agents judge(make_chat_provider(cfg), make_embedder(cfg), cfg.agent);
  std::vector<EvalRecord> records(pairs.size());
  std::atomic<bool> stop{false};
  run_parallel(pairs.size(), cfg.workers, stop, [&](std::size_t i) {
    const auto& p = pairs[i];
    auto& rec = records[i];
    if (p.error.empty()) {
      try {
        rec = judge.run_judge(p.query, p.response_a, p.response_b);
        rec.sample_id = p.id;
        return;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    } else {
      rec.error = p.error;
    }
    rec.sample_id = p.id;
    rec.incomplete = true;
    spdlog::error("pair {}: {}", p.id, rec.error);
  });

  // Pairs never reached because of an interrupt stay marked incomplete.
  for (auto& r : records) {
    if (r.sample_id.empty()) {
      r.incomplete = true;
      r.error = "not run";
    }
  }
  std::vector<std::string> datasets;
  std::size_t incomplete = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    datasets.push_back(pairs[i].dataset);
    if (records[i].incomplete) ++incomplete;
  }
  const auto rep = pairwise_report(records, datasets, o.label_a, o.label_b);
  emit(o.out, "pairwise", to_json(rep), render_table(rep));
  return incomplete > 0 || interrupted() ? kPartial : kOk;
}

int run_eval_sweep(const EvalOptions& o) {
  const auto presets = parse_presets(o.presets);
  const auto cfg = load_config_logged(o.config);
  for (const auto& p : presets) spdlog::info("preset {} {}", p.name, p.label());

  std::vector<SweepSample> samples;
  bool bad_input = false;
  for (const auto& line : read_jsonl(o.input)) {
    if (!line.error.empty()) {
      spdlog::error("{}: line {} is not valid JSON; skipped", o.input, line.line);
      bad_input = true;
      continue;
    }
    try {
      auto s = sample_from_json(line.value, cfg.agent.domain);
      samples.push_back({s.dataset, s.id, std::move(s.state)});
    } catch (const Error& e) {
      spdlog::error("{}: line {}: {}; skipped", o.input, line.line, e.what());
      bad_input = true;
    }
  }
  if (samples.empty()) fail(ErrorCode::InvalidInput, "no usable samples in " + o.input);

  const auto rep = lambda_sweep(samples, presets, make_chat_provider(cfg), make_embedder(cfg), cfg.agent);
  emit(o.out, "sweep", to_json(rep), render_table(rep));
  bool incomplete = bad_input;
  for (const auto& row : rep.grid) {
    for (const auto& c : row) incomplete = incomplete || c.incomplete;
  }
  return incomplete ? kPartial : kOk;
}

int run_eval_multiturn(const EvalOptions& o) {
  const auto cfg = load_config_logged(o.config);
  std::vector<nlohmann::json> conversations;
  for (const auto& line : read_jsonl(o.input)) {
    conversations.push_back(line.error.empty() ? line.value : nlohmann::json(nullptr));
  }
  const Agents judge(make_chat_provider(cfg), make_embedder(cfg), cfg.agent);
  const auto rep = multiturn_dominance(conversations, judge);
  emit(o.out, "multiturn", to_json(rep), render_table(rep));
  const bool failed = std::any_of(rep.rows.begin(), rep.rows.end(), [](const DominanceRow& r) { return r.failed > 0; });
  return failed ? kPartial : kOk;
}

}  // namespace proper::cli
