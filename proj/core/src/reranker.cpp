#include "proper/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "proper/text.hpp"

namespace proper {

std::string_view to_string(AlignmentSign s) {
  return s == AlignmentSign::PenaltyAsWritten ? "penalty" : "reward";
}

std::string_view to_string(PoolMode m) {
  return m == PoolMode::ImplicitOnly ? "implicit_only" : "joint";
}

std::string_view to_string(Solver s) { return s == Solver::Exact ? "exact" : "greedy"; }

AlignmentSign alignment_sign_from_string(std::string_view s) {
  if (s == "penalty") return AlignmentSign::PenaltyAsWritten;
  if (s == "reward") return AlignmentSign::RewardAsDescribed;
  fail(ErrorCode::Configuration, "unknown alignment sign '" + std::string(s) + "'");
}

PoolMode pool_mode_from_string(std::string_view s) {
  if (s == "implicit_only") return PoolMode::ImplicitOnly;
  if (s == "joint") return PoolMode::Joint;
  fail(ErrorCode::Configuration, "unknown pool mode '" + std::string(s) + "'");
}

void RerankConfig::validate() const {
  if (k < 0) fail(ErrorCode::Configuration, "budget k must be >= 0");
  if (!std::isfinite(lambda1) || lambda1 < 0.0) fail(ErrorCode::Configuration, "lambda1 must be finite and >= 0");
  if (!std::isfinite(lambda2) || lambda2 < 0.0) fail(ErrorCode::Configuration, "lambda2 must be finite and >= 0");
  if (exact_limit < 0) fail(ErrorCode::Configuration, "exact_limit must be >= 0");
}

std::string LambdaPreset::label() const {
  return "(" + text::format_real(lambda1) + "," + text::format_real(lambda2) + ")";
}

const std::vector<LambdaPreset>& reference_presets() {
  static const std::vector<LambdaPreset> presets = {
      {"strong", 8.0, 1.0},
      {"moderate", 2.0, 0.5},
      {"light", 0.0, 0.2},
  };
  return presets;
}

const LambdaPreset& preset_by_name(std::string_view name) {
  for (const auto& p : reference_presets()) {
    if (p.name == name) return p;
  }
  fail(ErrorCode::Configuration, "unknown lambda preset '" + std::string(name) + "'");
}

double combine_terms(double quality, double alignment, double diversity, const RerankConfig& cfg) {
  const double sign = cfg.alignment_sign == AlignmentSign::PenaltyAsWritten ? 1.0 : -1.0;
  return quality - sign * (cfg.lambda1 * alignment) - cfg.lambda2 * diversity;
}

std::vector<Dimension> candidate_pool(const ActivationPool& pool, const RerankConfig& cfg) {
  std::vector<Dimension> out;
  if (cfg.pool_mode == PoolMode::Joint) {
    out.insert(out.end(), pool.unmet_explicit.begin(), pool.unmet_explicit.end());
  }
  out.insert(out.end(), pool.implicit_candidates.begin(), pool.implicit_candidates.end());
  return out;
}

namespace {

// Precomputed per-candidate terms over candidates sorted by id.
class Scorer {
 public:
  Scorer(const ActivationPool& pool, const RerankConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    candidates_ = candidate_pool(pool, cfg);
    std::sort(candidates_.begin(), candidates_.end(),
              [](const Dimension& a, const Dimension& b) { return a.id() < b.id(); });
    for (std::size_t i = 1; i < candidates_.size(); ++i) {
      if (candidates_[i].id() == candidates_[i - 1].id()) {
        fail(ErrorCode::InvalidState, "candidate pool contains duplicate id " + candidates_[i].id());
      }
    }

    const std::size_t n = candidates_.size();
    std::vector<const EmbeddingVector*> vecs(n);
    for (std::size_t i = 0; i < n; ++i) vecs[i] = &pool.embedding_of(candidates_[i].id());
    std::vector<const EmbeddingVector*> anchors;
    for (const auto& e : pool.unmet_explicit) anchors.push_back(&pool.embedding_of(e.id()));

    quality_.resize(n);
    anchor_.resize(n);
    sim_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      quality_[i] = candidates_[i].confidence_or_zero();
      // max over an empty anchor set is 0
      double best = 0.0;
      for (std::size_t a = 0; a < anchors.size(); ++a) {
        const double c = cosine(*vecs[i], *anchors[a]);
        best = a == 0 ? c : std::max(best, c);
      }
      anchor_[i] = best;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double c = cosine(*vecs[i], *vecs[j]);
        sim_[i * n + j] = c;
        sim_[j * n + i] = c;
      }
    }
  }

  std::size_t size() const { return candidates_.size(); }
  const Dimension& candidate(std::size_t i) const { return candidates_[i]; }
  const RerankConfig& config() const { return cfg_; }
  double quality(std::size_t i) const { return quality_[i]; }
  double anchor(std::size_t i) const { return anchor_[i]; }
  double sim(std::size_t i, std::size_t j) const { return sim_[i * size() + j]; }

  std::size_t index_of(const std::string& id) const {
    auto it = std::lower_bound(candidates_.begin(), candidates_.end(), id,
                               [](const Dimension& d, const std::string& key) { return d.id() < key; });
    if (it == candidates_.end() || it->id() != id) {
      fail(ErrorCode::InvalidInput, "dimension " + id + " is not in the candidate pool");
    }
    return static_cast<std::size_t>(it - candidates_.begin());
  }

  // `idx` must be ascending.
  ObjectiveBreakdown evaluate(const std::vector<std::size_t>& idx) const {
    ObjectiveBreakdown b;
    for (auto i : idx) b.quality_term += quality_[i];
    for (auto i : idx) b.alignment_term += anchor_[i];
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t c = a + 1; c < idx.size(); ++c) b.diversity_term += sim(idx[a], idx[c]);
    }
    b.objective = combine_terms(b.quality_term, b.alignment_term, b.diversity_term, cfg_);
    return b;
  }

  std::vector<std::string> ids(const std::vector<std::size_t>& idx) const {
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(candidates_[i].id());
    return out;
  }

  SelectionResult result(const std::vector<std::size_t>& idx, Solver solver) const {
    const auto b = evaluate(idx);
    SelectionResult r;
    r.selected = ids(idx);
    r.objective = b.objective;
    r.quality_term = b.quality_term;
    r.alignment_term = b.alignment_term;
    r.diversity_term = b.diversity_term;
    r.solver = solver;
    r.config = cfg_;
    return r;
  }

 private:
  RerankConfig cfg_;
  std::vector<Dimension> candidates_;
  std::vector<double> quality_;
  std::vector<double> anchor_;
  std::vector<double> sim_;
};

// Since candidates are sorted by id, comparing ascending index lists
// lexicographically is the same as comparing sorted id lists.
bool lexicographically_smaller(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

ObjectiveBreakdown objective(const std::vector<std::string>& ids, const ActivationPool& pool,
                             const RerankConfig& cfg) {
  Scorer scorer(pool, cfg);
  std::vector<std::size_t> idx;
  idx.reserve(ids.size());
  for (const auto& id : ids) idx.push_back(scorer.index_of(id));
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
    fail(ErrorCode::InvalidInput, "selection contains a duplicate id");
  }
  return scorer.evaluate(idx);
}

SelectionResult select_exact(const ActivationPool& pool, const RerankConfig& cfg) {
  Scorer scorer(pool, cfg);
  const std::size_t n = scorer.size();
  if (n > static_cast<std::size_t>(cfg.exact_limit)) {
    fail(ErrorCode::Capacity, "exact selection over " + std::to_string(n) +
                                  " candidates exceeds the limit of " + std::to_string(cfg.exact_limit) +
                                  "; use the greedy solver");
  }
  const std::size_t m = std::min(static_cast<std::size_t>(cfg.k), n);

  std::vector<std::size_t> combo(m);
  for (std::size_t i = 0; i < m; ++i) combo[i] = i;

  std::vector<std::size_t> best = combo;
  ObjectiveBreakdown best_score = scorer.evaluate(combo);

  while (true) {
    // advance to the next m-combination of [0, n) in lexicographic order
    std::size_t pos = m;
    while (pos > 0 && combo[pos - 1] == n - m + (pos - 1)) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t i = pos; i < m; ++i) combo[i] = combo[i - 1] + 1;

    const auto score = scorer.evaluate(combo);
    const bool better =
        score.objective > best_score.objective ||
        (score.objective == best_score.objective &&
         (score.quality_term > best_score.quality_term ||
          (score.quality_term == best_score.quality_term && lexicographically_smaller(combo, best))));
    if (better) {
      best = combo;
      best_score = score;
    }
  }
  return scorer.result(best, Solver::Exact);
}

SelectionResult select_greedy(const ActivationPool& pool, const RerankConfig& cfg) {
  Scorer scorer(pool, cfg);
  const std::size_t n = scorer.size();
  const std::size_t m = std::min(static_cast<std::size_t>(cfg.k), n);
  const RerankConfig& c = scorer.config();

  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  while (chosen.size() < m) {
    std::size_t pick = n;
    double pick_gain = 0.0;
    std::vector<std::size_t> pick_set;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double redundancy = 0.0;
      for (auto s : chosen) redundancy += scorer.sim(i, s);
      const double gain = combine_terms(scorer.quality(i), scorer.anchor(i), redundancy, c);

      auto set = chosen;
      set.insert(std::upper_bound(set.begin(), set.end(), i), i);
      const bool better =
          pick == n || gain > pick_gain ||
          (gain == pick_gain &&
           (scorer.quality(i) > scorer.quality(pick) ||
            (scorer.quality(i) == scorer.quality(pick) && lexicographically_smaller(set, pick_set))));
      if (better) {
        pick = i;
        pick_gain = gain;
        pick_set = std::move(set);
      }
    }
    taken[pick] = true;
    chosen = std::move(pick_set);
  }
  return scorer.result(chosen, Solver::Greedy);
}

SelectionResult select(const ActivationPool& pool, const RerankConfig& cfg) {
  const auto n = candidate_pool(pool, cfg).size();
  if (n <= static_cast<std::size_t>(cfg.exact_limit)) return select_exact(pool, cfg);
  return select_greedy(pool, cfg);
}

nlohmann::json to_json(const SelectionResult& r) {
  return {{"selected", r.selected},
          {"objective", r.objective},
          {"quality_term", r.quality_term},
          {"alignment_term", r.alignment_term},
          {"diversity_term", r.diversity_term},
          {"solver", std::string(to_string(r.solver))},
          {"k", r.config.k},
          {"lambda1", r.config.lambda1},
          {"lambda2", r.config.lambda2},
          {"alignment_sign", std::string(to_string(r.config.alignment_sign))},
          {"pool_mode", std::string(to_string(r.config.pool_mode))},
          {"exact_limit", r.config.exact_limit}};
}

SelectionResult selection_from_json(const nlohmann::json& j) {
  SelectionResult r;
  r.selected = j.at("selected").get<std::vector<std::string>>();
  r.objective = j.at("objective").get<double>();
  r.quality_term = j.at("quality_term").get<double>();
  r.alignment_term = j.at("alignment_term").get<double>();
  r.diversity_term = j.at("diversity_term").get<double>();
  const auto solver = j.at("solver").get<std::string>();
  if (solver != "exact" && solver != "greedy") fail(ErrorCode::InvalidInput, "unknown solver " + solver);
  r.solver = solver == "exact" ? Solver::Exact : Solver::Greedy;
  r.config.k = j.at("k").get<int>();
  r.config.lambda1 = j.at("lambda1").get<double>();
  r.config.lambda2 = j.at("lambda2").get<double>();
  r.config.alignment_sign = alignment_sign_from_string(j.at("alignment_sign").get<std::string>());
  r.config.pool_mode = pool_mode_from_string(j.at("pool_mode").get<std::string>());
  r.config.exact_limit = j.value("exact_limit", RerankConfig::kDefaultExactLimit);
  return r;
}

}  // namespace proper
