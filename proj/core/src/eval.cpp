#include "proper/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "proper/text.hpp"

namespace proper {

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Left-aligned first column, right-aligned others, two-space gutters.
std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const auto& cell = rows[i][c];
      const std::string pad(width[c] - cell.size(), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? cell + pad : pad + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

nlohmann::json preset_json(const LambdaPreset& p) {
  return {{"name", p.name}, {"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"label", p.label()}};
}

}  // namespace

AggregateReport aggregate(const std::vector<EvalRecord>& records) {
  AggregateReport r;
  double sum_a = 0.0;
  double sum_b = 0.0;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  for (const auto& rec : records) {
    if (rec.incomplete) {
      ++r.incomplete;
      continue;
    }
    const double a = rec.effective_a();
    const double b = rec.effective_b();
    sum_a += a;
    sum_b += b;
    ++r.n;
    if (a > b) {
      ++wins_a;
    } else if (b > a) {
      ++wins_b;
    } else {
      ++r.ties;
    }
  }
  if (r.n == 0) fail(ErrorCode::InvalidInput, "aggregate needs at least one complete record");
  const auto n = static_cast<double>(r.n);
  r.mu_a = sum_a / n;
  r.mu_b = sum_b / n;
  r.win_a = (static_cast<double>(wins_a) + 0.5 * static_cast<double>(r.ties)) / n * 100.0;
  r.win_b = (static_cast<double>(wins_b) + 0.5 * static_cast<double>(r.ties)) / n * 100.0;
  r.p_value = sign_test(wins_a, wins_b);
  return r;
}

double sign_test(std::size_t wins_a, std::size_t wins_b) {
  const std::size_t m = wins_a + wins_b;
  if (m == 0) return 1.0;
  const std::size_t k = std::min(wins_a, wins_b);
  const double dm = static_cast<double>(m);
  // log P(X = i) for X ~ Binomial(m, 1/2), summed with log-sum-exp
  std::vector<double> terms;
  terms.reserve(k + 1);
  for (std::size_t i = 0; i <= k; ++i) {
    const double di = static_cast<double>(i);
    terms.push_back(std::lgamma(dm + 1) - std::lgamma(di + 1) - std::lgamma(dm - di + 1) - dm * std::log(2.0));
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  const double log_tail = peak + std::log(acc);
  return std::min(1.0, std::exp(std::log(2.0) + log_tail));
}

double sign_test(const std::vector<EvalRecord>& records) {
  std::size_t a = 0;
  std::size_t b = 0;
  for (const auto& r : records) {
    if (r.incomplete) continue;
    if (r.effective_a() > r.effective_b()) ++a;
    if (r.effective_b() > r.effective_a()) ++b;
  }
  return sign_test(a, b);
}

nlohmann::json to_json(const AggregateReport& r) {
  return {{"mu_a", r.mu_a},   {"mu_b", r.mu_b}, {"win_a", r.win_a},           {"win_b", r.win_b},
          {"n", r.n},         {"ties", r.ties}, {"incomplete", r.incomplete}, {"p_value", r.p_value}};
}

PairwiseReport pairwise_report(const std::vector<EvalRecord>& records, const std::vector<std::string>& datasets,
                               std::string label_a, std::string label_b) {
  if (records.size() != datasets.size()) fail(ErrorCode::InvalidInput, "one dataset name per record expected");
  PairwiseReport rep;
  rep.label_a = std::move(label_a);
  rep.label_b = std::move(label_b);
  rep.records = records;
  rep.record_datasets = datasets;
  std::vector<std::string> order;
  for (const auto& d : datasets) {
    if (std::find(order.begin(), order.end(), d) == order.end()) order.push_back(d);
  }
  for (const auto& d : order) {
    std::vector<EvalRecord> subset;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (datasets[i] == d) subset.push_back(records[i]);
    }
    const bool any_complete =
        std::any_of(subset.begin(), subset.end(), [](const EvalRecord& r) { return !r.incomplete; });
    if (!any_complete) {
      AggregateReport empty;
      empty.incomplete = subset.size();
      rep.rows.emplace_back(d, empty);
      continue;
    }
    rep.rows.emplace_back(d, aggregate(subset));
  }
  return rep;
}

nlohmann::json to_json(const PairwiseReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [d, agg] : r.rows) {
    auto j = to_json(agg);
    j["dataset"] = d;
    rows.push_back(std::move(j));
  }
  nlohmann::json recs = nlohmann::json::array();
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    auto j = to_json(r.records[i]);
    j["dataset"] = r.record_datasets[i];
    recs.push_back(std::move(j));
  }
  return {{"report_version", PairwiseReport::kVersion},
          {"kind", "pairwise"},
          {"label_a", r.label_a},
          {"label_b", r.label_b},
          {"rows", std::move(rows)},
          {"records", std::move(recs)}};
}

std::string render_table(const PairwiseReport& r) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Dataset", "muScore " + r.label_a, "muScore " + r.label_b, "Win% " + r.label_a,
                  "Win% " + r.label_b, "n", "ties", "p", "incomplete"});
  for (const auto& [d, a] : r.rows) {
    if (a.n == 0) {
      rows.push_back({d, "-", "-", "-", "-", "0", "0", "-", std::to_string(a.incomplete)});
      continue;
    }
    rows.push_back({d, fixed(a.mu_a), fixed(a.mu_b), fixed(a.win_a), fixed(a.win_b), std::to_string(a.n),
                    std::to_string(a.ties), fixed(a.p_value, 4), std::to_string(a.incomplete)});
  }
  return aligned(rows);
}

const SweepCell& SweepReport::cell(std::size_t preset, std::size_t dataset) const {
  if (preset >= grid.size() || dataset >= grid[preset].size()) {
    fail(ErrorCode::InvalidInput, "sweep cell out of range");
  }
  return grid[preset][dataset];
}

bool operator==(const LambdaPreset& a, const LambdaPreset& b) {
  return a.name == b.name && a.lambda1 == b.lambda1 && a.lambda2 == b.lambda2;
}

bool operator==(const SweepReport& a, const SweepReport& b) {
  return a.presets == b.presets && a.datasets == b.datasets && a.grid == b.grid;
}

SweepReport lambda_sweep(const std::vector<SweepSample>& samples, const std::vector<LambdaPreset>& presets,
                         std::shared_ptr<ChatProvider> chat, std::shared_ptr<const EmbeddingProvider> embedder,
                         const AgentConfig& base) {
  if (presets.empty()) fail(ErrorCode::Configuration, "sweep needs at least one preset");
  std::vector<AgentConfig> configs;
  for (const auto& p : presets) {
    AgentConfig cfg = base;
    cfg.rerank.lambda1 = p.lambda1;
    cfg.rerank.lambda2 = p.lambda2;
    cfg.validate();
    configs.push_back(std::move(cfg));
  }

  SweepReport rep;
  rep.presets = presets;
  for (const auto& s : samples) {
    if (std::find(rep.datasets.begin(), rep.datasets.end(), s.dataset) == rep.datasets.end()) {
      rep.datasets.push_back(s.dataset);
    }
  }
  rep.grid.assign(presets.size(), std::vector<SweepCell>(rep.datasets.size()));

  for (std::size_t p = 0; p < presets.size(); ++p) {
    const Agents agents(chat, embedder, configs[p]);
    std::vector<double> sums(rep.datasets.size(), 0.0);
    for (const auto& s : samples) {
      const auto d = static_cast<std::size_t>(
          std::find(rep.datasets.begin(), rep.datasets.end(), s.dataset) - rep.datasets.begin());
      auto& cell = rep.grid[p][d];
      auto record_failure = [&](const std::string& what) {
        ++cell.failed;
        cell.incomplete = true;
        cell.errors.push_back(s.sample_id + ": " + what);
        spdlog::warn("sweep {} {}: {}", presets[p].label(), s.sample_id, what);
      };
      const auto trace = agents.run_proper(s.state, s.sample_id);
      if (!trace.ok()) {
        record_failure(trace.failure->stage + ": " + trace.failure->message);
        continue;
      }
      try {
        const auto rec = agents.run_judge(query_block(s.state, s.state.domain == Domain::Recommendation),
                                          trace.final_response, trace.r0);
        sums[d] += rec.effective_a();
        ++cell.judged;
      } catch (const Error& e) {
        record_failure(std::string("judge: ") + e.what());
      }
    }
    for (std::size_t d = 0; d < rep.datasets.size(); ++d) {
      auto& cell = rep.grid[p][d];
      if (cell.judged > 0) cell.mu = sums[d] / static_cast<double>(cell.judged);
    }
  }
  return rep;
}

nlohmann::json to_json(const SweepReport& r) {
  nlohmann::json presets = nlohmann::json::array();
  for (const auto& p : r.presets) presets.push_back(preset_json(p));
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& row : r.grid) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : row) {
      cells.push_back({{"mu", c.mu ? nlohmann::json(*c.mu) : nlohmann::json(nullptr)},
                       {"judged", c.judged},
                       {"failed", c.failed},
                       {"incomplete", c.incomplete},
                       {"errors", c.errors}});
    }
    grid.push_back(std::move(cells));
  }
  return {{"report_version", SweepReport::kVersion},
          {"kind", "lambda_sweep"},
          {"presets", std::move(presets)},
          {"datasets", r.datasets},
          {"grid", std::move(grid)}};
}

SweepReport sweep_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("report_version").get<int>() != SweepReport::kVersion || j.at("kind") != "lambda_sweep") {
      fail(ErrorCode::InvalidInput, "not a version 1 sweep report");
    }
    SweepReport r;
    for (const auto& p : j.at("presets")) {
      r.presets.push_back({p.at("name").get<std::string>(), p.at("lambda1").get<double>(),
                           p.at("lambda2").get<double>()});
    }
    r.datasets = j.at("datasets").get<std::vector<std::string>>();
    for (const auto& row : j.at("grid")) {
      std::vector<SweepCell> cells;
      for (const auto& c : row) {
        SweepCell cell;
        if (!c.at("mu").is_null()) cell.mu = c["mu"].get<double>();
        cell.judged = c.at("judged").get<std::size_t>();
        cell.failed = c.at("failed").get<std::size_t>();
        cell.incomplete = c.at("incomplete").get<bool>();
        cell.errors = c.at("errors").get<std::vector<std::string>>();
        cells.push_back(std::move(cell));
      }
      if (cells.size() != r.datasets.size()) fail(ErrorCode::InvalidInput, "sweep row width mismatch");
      r.grid.push_back(std::move(cells));
    }
    if (r.grid.size() != r.presets.size()) fail(ErrorCode::InvalidInput, "sweep row count mismatch");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed sweep report: ") + e.what());
  }
}

std::string render_table(const SweepReport& r) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"(lambda1,lambda2)"};
  header.insert(header.end(), r.datasets.begin(), r.datasets.end());
  rows.push_back(std::move(header));
  for (std::size_t p = 0; p < r.presets.size(); ++p) {
    std::vector<std::string> row = {r.presets[p].label()};
    for (const auto& c : r.grid[p]) row.push_back((c.mu ? fixed(*c.mu) : "-") + (c.incomplete ? "*" : ""));
    rows.push_back(std::move(row));
  }
  return aligned(rows);
}

Conversation conversation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "conversation is not an object");
  auto str = [&](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_string() || text::is_blank(obj[key].get<std::string>())) {
      fail(ErrorCode::InvalidInput, where + " needs a non-empty string \"" + key + "\"");
    }
    return obj[key].get<std::string>();
  };
  Conversation c;
  c.id = str(j, "id", "conversation");
  c.dataset = str(j, "dataset", "conversation " + c.id);
  if (!j.contains("turns") || !j["turns"].is_array() || j["turns"].empty()) {
    fail(ErrorCode::InvalidInput, "conversation " + c.id + " has no turns");
  }
  for (std::size_t i = 0; i < j["turns"].size(); ++i) {
    const auto& t = j["turns"][i];
    const auto where = "conversation " + c.id + " turn " + std::to_string(i);
    if (!t.is_object()) fail(ErrorCode::InvalidInput, where + " is not an object");
    c.turns.push_back({str(t, "query", where), str(t, "response_a", where), str(t, "response_b", where)});
  }
  return c;
}

std::string DominanceRow::counts() const { return std::to_string(wins_a) + "/" + std::to_string(denominator()); }

std::string trajectory_query(const Conversation& c) {
  if (c.turns.size() == 1) return c.turns.front().query;
  std::string out;
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    if (i > 0) out += "\n";
    out += "Turn " + std::to_string(i + 1) + ": " + c.turns[i].query;
  }
  return out;
}

std::string trajectory_transcript(const Conversation& c, bool side_a) {
  std::string out;
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    const auto& t = c.turns[i];
    if (i > 0) out += "\n\n";
    out += "Turn " + std::to_string(i + 1) + "\nUser: " + t.query + "\nAssistant: " +
           (side_a ? t.response_a : t.response_b);
  }
  return out;
}

DominanceReport multiturn_dominance(const std::vector<nlohmann::json>& conversations, const Agents& judge) {
  DominanceReport rep;
  auto row_for = [&](const std::string& dataset) -> DominanceRow& {
    for (auto& r : rep.rows) {
      if (r.dataset == dataset) return r;
    }
    rep.rows.push_back({});
    rep.rows.back().dataset = dataset;
    return rep.rows.back();
  };
  for (std::size_t i = 0; i < conversations.size(); ++i) {
    Conversation c;
    try {
      c = conversation_from_json(conversations[i]);
    } catch (const Error& e) {
      const auto& j = conversations[i];
      const std::string dataset =
          j.is_object() && j.contains("dataset") && j["dataset"].is_string() ? j["dataset"].get<std::string>() : "";
      if (!dataset.empty()) ++row_for(dataset).skipped;
      rep.warnings.push_back("conversation " + std::to_string(i) + " skipped: " + e.what());
      spdlog::warn("{}", rep.warnings.back());
      continue;
    }
    auto& row = row_for(c.dataset);
    try {
      const auto rec =
          judge.run_judge(trajectory_query(c), trajectory_transcript(c, true), trajectory_transcript(c, false));
      const double a = rec.effective_a();
      const double b = rec.effective_b();
      if (a > b) {
        ++row.wins_a;
      } else if (b > a) {
        ++row.wins_b;
      } else {
        ++row.ties;
      }
    } catch (const Error& e) {
      ++row.failed;
      rep.warnings.push_back("conversation " + c.id + " not judged: " + e.what());
      spdlog::warn("{}", rep.warnings.back());
    }
  }
  return rep;
}

nlohmann::json to_json(const DominanceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"dataset", row.dataset},
                    {"wins_a", row.wins_a},
                    {"wins_b", row.wins_b},
                    {"ties", row.ties},
                    {"failed", row.failed},
                    {"skipped", row.skipped},
                    {"denominator", row.denominator()},
                    {"counts", row.counts()}});
  }
  return {{"report_version", DominanceReport::kVersion},
          {"kind", "multiturn"},
          {"rows", std::move(rows)},
          {"warnings", r.warnings}};
}

std::string render_table(const DominanceReport& r) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Dataset", "A wins", "B wins", "ties", "failed", "skipped"});
  for (const auto& row : r.rows) {
    rows.push_back({row.dataset, row.counts(), std::to_string(row.wins_b), std::to_string(row.ties),
                    std::to_string(row.failed), std::to_string(row.skipped)});
  }
  return aligned(rows);
}

}  // namespace proper
