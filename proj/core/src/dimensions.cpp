#include "proper/dimensions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "proper/text.hpp"

namespace proper {

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::Coding: return "coding";
    case Domain::Medical: return "medical";
    case Domain::Recommendation: return "recommendation";
  }
  return "medical";
}

Domain domain_from_string(std::string_view s) {
  const auto lower = text::to_lower(text::trim(s));
  if (lower == "coding" || lower == "codecontests" || lower == "code-contests" || lower == "code")
    return Domain::Coding;
  if (lower == "medical" || lower == "md") return Domain::Medical;
  if (lower == "recommendation" || lower == "pwab" || lower == "shopping")
    return Domain::Recommendation;
  fail(ErrorCode::InvalidInput, "unknown domain '" + std::string(s) + "'");
}

std::string_view dataset_label(Domain d) {
  switch (d) {
    case Domain::Coding: return "Code-Contests";
    case Domain::Medical: return "MD";
    case Domain::Recommendation: return "PWAB";
  }
  return "MD";
}

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::UserExplicit: return "user_explicit";
    case Origin::SystemExplicit: return "system_explicit";
    case Origin::Implicit: return "implicit";
  }
  return "implicit";
}

Origin origin_from_string(std::string_view s) {
  if (s == "user_explicit") return Origin::UserExplicit;
  if (s == "system_explicit") return Origin::SystemExplicit;
  if (s == "implicit") return Origin::Implicit;
  fail(ErrorCode::InvalidInput, "unknown dimension origin '" + std::string(s) + "'");
}

std::string Dimension::content_id(std::string_view name, std::string_view value) {
  // Unit separator keeps ("ab","c") and ("a","bc") apart.
  std::string key;
  key.reserve(name.size() + value.size() + 1);
  key.append(name);
  key.push_back('\x1f');
  key.append(value);
  return text::hex64(text::fnv1a64(key));
}

Dimension Dimension::make(std::string_view name, std::string_view value,
                          std::optional<std::string> justification, Origin origin,
                          std::optional<double> confidence) {
  const auto n = text::trim(name);
  const auto v = text::trim(value);
  if (n.empty()) fail(ErrorCode::InvalidInput, "dimension name is blank");
  if (v.empty()) fail(ErrorCode::InvalidInput, "dimension value is blank (name '" + std::string(n) + "')");
  if (confidence && (!std::isfinite(*confidence) || *confidence > 0.0)) {
    fail(ErrorCode::InvalidInput, "dimension confidence must be a finite log-probability <= 0");
  }
  Dimension d;
  d.name_ = std::string(n);
  d.value_ = std::string(v);
  d.justification_ = std::move(justification);
  d.origin_ = origin;
  d.confidence_ = confidence;
  d.id_ = content_id(d.name_, d.value_);
  return d;
}

Dimension Dimension::with_confidence(std::optional<double> c) const {
  return make(name_, value_, justification_, origin_, c);
}

Dimension Dimension::with_origin(Origin o) const {
  Dimension d = *this;
  d.origin_ = o;
  return d;
}

nlohmann::json to_wire_json(const Dimension& d) {
  nlohmann::json j = {{"name", d.name()}, {"value", d.value()}};
  j["justification"] = d.justification() ? nlohmann::json(*d.justification()) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const Dimension& d) {
  auto j = to_wire_json(d);
  j["id"] = d.id();
  j["origin"] = std::string(to_string(d.origin()));
  if (d.confidence()) j["confidence"] = *d.confidence();
  return j;
}

Dimension dimension_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "dimension must be a JSON object");
  std::optional<std::string> justification;
  if (j.contains("justification") && !j["justification"].is_null()) {
    justification = j["justification"].get<std::string>();
  }
  std::optional<double> confidence;
  if (j.contains("confidence") && !j["confidence"].is_null()) confidence = j["confidence"].get<double>();
  const auto origin = j.contains("origin") ? origin_from_string(j["origin"].get<std::string>())
                                           : Origin::Implicit;
  return Dimension::make(j.at("name").get<std::string>(), j.at("value").get<std::string>(),
                         std::move(justification), origin, confidence);
}

std::string format_persona(const Persona& p) {
  std::vector<std::string> parts;
  parts.reserve(p.size());
  for (const auto& [k, v] : p) parts.push_back(k + ": " + v);
  return text::join(parts, "; ");
}

void InteractionState::validate() const {
  if (text::is_blank(query)) fail(ErrorCode::InvalidInput, "interaction query is blank");
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& t = history[i];
    if (t.role == Role::System) {
      fail(ErrorCode::InvalidInput, "history turn " + std::to_string(i) + " has role system");
    }
    if (text::is_blank(t.text)) {
      fail(ErrorCode::InvalidInput, "history turn " + std::to_string(i) + " is blank");
    }
    if (i > 0 && history[i - 1].role == t.role) {
      fail(ErrorCode::InvalidInput, "history turns " + std::to_string(i - 1) + " and " +
                                        std::to_string(i) + " do not alternate roles");
    }
  }
}

namespace {

std::string persona_value_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& x : v) parts.push_back(persona_value_text(x));
    return text::join(parts, ", ");
  }
  return v.dump();
}

}  // namespace

nlohmann::json to_json(const InteractionState& s) {
  nlohmann::json j;
  j["query"] = s.query;
  j["domain"] = std::string(to_string(s.domain));
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& t : s.history) hist.push_back({{"role", std::string(to_string(t.role))}, {"text", t.text}});
  j["history"] = std::move(hist);
  if (s.persona) {
    nlohmann::json p = nlohmann::json::array();
    for (const auto& [k, v] : *s.persona) p.push_back({k, v});
    j["persona"] = std::move(p);
  } else {
    j["persona"] = nullptr;
  }
  j["baseline_response"] = s.baseline_response ? nlohmann::json(*s.baseline_response) : nlohmann::json(nullptr);
  return j;
}

InteractionState interaction_state_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "interaction state must be a JSON object");
  if (!j.contains("query") || !j["query"].is_string()) {
    fail(ErrorCode::InvalidInput, "interaction state needs a string \"query\"");
  }
  InteractionState s;
  s.query = j["query"].get<std::string>();
  if (j.contains("domain")) s.domain = domain_from_string(j["domain"].get<std::string>());
  if (j.contains("history") && !j["history"].is_null()) {
    if (!j["history"].is_array()) fail(ErrorCode::InvalidInput, "\"history\" must be an array");
    for (const auto& t : j["history"]) {
      if (!t.is_object() || !t.contains("role") || !t.contains("text")) {
        fail(ErrorCode::InvalidInput, "history turns need \"role\" and \"text\"");
      }
      s.history.push_back({role_from_string(t["role"].get<std::string>()), t["text"].get<std::string>()});
    }
  }
  if (j.contains("persona") && !j["persona"].is_null()) {
    Persona p;
    const auto& pj = j["persona"];
    if (pj.is_object()) {
      for (const auto& [k, v] : pj.items()) p.emplace_back(k, persona_value_text(v));
    } else if (pj.is_array()) {
      for (const auto& kv : pj) {
        if (!kv.is_array() || kv.size() != 2 || !kv[0].is_string()) {
          fail(ErrorCode::InvalidInput, "persona entries must be [key, value] pairs");
        }
        p.emplace_back(kv[0].get<std::string>(), persona_value_text(kv[1]));
      }
    } else {
      fail(ErrorCode::InvalidInput, "\"persona\" must be an object or a list of pairs");
    }
    s.persona = std::move(p);
  }
  if (j.contains("baseline_response") && !j["baseline_response"].is_null()) {
    s.baseline_response = j["baseline_response"].get<std::string>();
  }
  s.validate();
  return s;
}

std::string_view to_string(EmbeddingTextMode m) {
  switch (m) {
    case EmbeddingTextMode::NameOnly: return "name";
    case EmbeddingTextMode::ValueOnly: return "value";
    case EmbeddingTextMode::NameValue: return "name_value";
  }
  return "name_value";
}

EmbeddingTextMode embedding_text_mode_from_string(std::string_view s) {
  if (s == "name") return EmbeddingTextMode::NameOnly;
  if (s == "value") return EmbeddingTextMode::ValueOnly;
  if (s == "name_value") return EmbeddingTextMode::NameValue;
  fail(ErrorCode::Configuration, "unknown embedding text mode '" + std::string(s) + "'");
}

std::string embedding_text(const Dimension& d, EmbeddingTextMode mode) {
  switch (mode) {
    case EmbeddingTextMode::NameOnly: return d.name();
    case EmbeddingTextMode::ValueOnly: return d.value();
    case EmbeddingTextMode::NameValue: return d.name() + ": " + d.value();
  }
  return d.name() + ": " + d.value();
}

SemanticMatcher::SemanticMatcher(std::shared_ptr<const EmbeddingProvider> embedder, double threshold,
                                 EmbeddingTextMode mode)
    : embedder_(std::move(embedder)), threshold_(threshold), mode_(mode) {
  if (!embedder_) fail(ErrorCode::Configuration, "semantic matcher needs an embedder");
  if (!(threshold_ > 0.0 && threshold_ <= 1.0)) {
    fail(ErrorCode::Configuration, "match threshold must lie in (0, 1], got " + text::format_real(threshold_));
  }
}

EmbeddingVector SemanticMatcher::embed(const Dimension& d) const {
  return embedder_->embed(embedding_text(d, mode_));
}

std::vector<EmbedOutcome> SemanticMatcher::embed_all(const std::vector<Dimension>& dims) const {
  std::vector<std::string> texts;
  texts.reserve(dims.size());
  for (const auto& d : dims) texts.push_back(embedding_text(d, mode_));
  return embedder_->embed_batch(texts);
}

bool SemanticMatcher::matches(const Dimension& a, const Dimension& b) const {
  if (a.id() == b.id()) return true;
  return cosine(embed(a), embed(b)) >= threshold_;
}

const EmbeddingVector& ActivationPool::embedding_of(const std::string& id) const {
  auto it = embeddings.find(id);
  if (it == embeddings.end()) fail(ErrorCode::InvalidState, "no embedding for dimension " + id);
  return it->second;
}

void ActivationPool::validate() const {
  std::set<std::string> seen;
  auto check = [&](const Dimension& d) {
    if (!seen.insert(d.id()).second) fail(ErrorCode::InvalidState, "duplicate dimension id " + d.id());
    if (!embeddings.contains(d.id())) fail(ErrorCode::InvalidState, "no embedding for dimension " + d.id());
  };
  for (const auto& d : unmet_explicit) check(d);
  for (const auto& d : implicit_candidates) check(d);
}

namespace {

std::vector<EmbeddingVector> embed_or_throw(const std::vector<Dimension>& dims,
                                            const SemanticMatcher& matcher) {
  auto outcomes = matcher.embed_all(dims);
  std::vector<EmbeddingVector> out;
  out.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (auto* e = std::get_if<Error>(&outcomes[i])) {
      Error err = *e;
      throw err.with_path("dimension '" + dims[i].name() + "'");
    }
    out.push_back(std::get<EmbeddingVector>(std::move(outcomes[i])));
  }
  return out;
}

}  // namespace

std::vector<Dimension> unmet_explicit(const std::vector<Dimension>& user_exp,
                                      const std::vector<Dimension>& sys_exp,
                                      const SemanticMatcher& matcher) {
  for (const auto& d : user_exp) {
    if (d.origin() != Origin::UserExplicit) {
      fail(ErrorCode::InvalidInput, "unmet_explicit: '" + d.name() + "' is not user-explicit");
    }
  }
  for (const auto& d : sys_exp) {
    if (d.origin() != Origin::SystemExplicit) {
      fail(ErrorCode::InvalidInput, "unmet_explicit: '" + d.name() + "' is not system-explicit");
    }
  }
  if (user_exp.empty()) return {};
  if (sys_exp.empty()) return user_exp;

  const auto user_vecs = embed_or_throw(user_exp, matcher);
  const auto sys_vecs = embed_or_throw(sys_exp, matcher);

  std::vector<Dimension> out;
  for (std::size_t i = 0; i < user_exp.size(); ++i) {
    bool covered = false;
    for (std::size_t j = 0; j < sys_exp.size() && !covered; ++j) {
      covered = user_exp[i].id() == sys_exp[j].id() ||
                cosine(user_vecs[i], sys_vecs[j]) >= matcher.threshold();
    }
    if (!covered) out.push_back(user_exp[i]);
  }
  return out;
}

std::vector<Dimension> dedupe_candidates(const std::vector<Dimension>& candidates,
                                         const std::map<std::string, EmbeddingVector>& embeddings,
                                         double threshold) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].confidence_or_zero() > candidates[b].confidence_or_zero();
  });

  std::vector<std::size_t> kept;
  for (auto idx : order) {
    const auto& d = candidates[idx];
    const auto& v = embeddings.at(d.id());
    bool duplicate = false;
    for (auto k : kept) {
      const auto& other = candidates[k];
      if (other.id() == d.id() || cosine(v, embeddings.at(other.id())) >= threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<Dimension> out;
  out.reserve(kept.size());
  for (auto k : kept) out.push_back(candidates[k]);
  return out;
}

ActivationPool build_activation_pool(const InteractionState& state,
                                     const std::vector<Dimension>& user_exp,
                                     const std::vector<Dimension>& sys_exp,
                                     const std::vector<Dimension>& implicit,
                                     const SemanticMatcher& matcher, const PoolOptions& options) {
  if (!state.baseline_response) {
    fail(ErrorCode::InvalidState, "activation pool needs the baseline response");
  }
  if (!(options.dedupe_threshold > 0.0 && options.dedupe_threshold <= 1.0)) {
    fail(ErrorCode::Configuration, "dedupe threshold must lie in (0, 1]");
  }
  for (const auto& d : implicit) {
    if (d.origin() != Origin::Implicit) {
      fail(ErrorCode::InvalidInput, "activation pool: '" + d.name() + "' is not implicit");
    }
  }

  ActivationPool pool;

  std::set<std::string> unmet_ids;
  for (auto& d : unmet_explicit(user_exp, sys_exp, matcher)) {
    if (unmet_ids.insert(d.id()).second) pool.unmet_explicit.push_back(std::move(d));
  }
  if (!pool.unmet_explicit.empty()) {
    auto vecs = embed_or_throw(pool.unmet_explicit, matcher);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      pool.embeddings.insert_or_assign(pool.unmet_explicit[i].id(), std::move(vecs[i]));
    }
  }

  std::vector<Dimension> embedded;
  std::map<std::string, EmbeddingVector> candidate_vecs;
  auto outcomes = matcher.embed_all(implicit);
  for (std::size_t i = 0; i < implicit.size(); ++i) {
    const auto& d = implicit[i];
    if (const auto* e = std::get_if<Error>(&outcomes[i])) {
      pool.warnings.push_back("dropped implicit '" + d.name() + "': " + e->what());
      continue;
    }
    if (unmet_ids.contains(d.id())) {
      pool.warnings.push_back("dropped implicit '" + d.name() + "': same as an unmet explicit dimension");
      continue;
    }
    candidate_vecs.insert_or_assign(d.id(), std::get<EmbeddingVector>(outcomes[i]));
    embedded.push_back(d);
  }

  pool.implicit_candidates = dedupe_candidates(embedded, candidate_vecs, options.dedupe_threshold);
  for (const auto& d : pool.implicit_candidates) {
    pool.embeddings.insert_or_assign(d.id(), candidate_vecs.at(d.id()));
  }
  return pool;
}

}  // namespace proper
