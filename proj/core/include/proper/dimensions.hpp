#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/chat.hpp"
#include "proper/embeddings.hpp"

namespace proper {

enum class Domain { Coding, Medical, Recommendation };

std::string_view to_string(Domain d);
// Accepts "coding" / "medical" / "recommendation" and the dataset aliases
// "codecontests", "md", "pwab".
Domain domain_from_string(std::string_view s);
// Dataset label used in report tables: "Code-Contests", "MD", "PWAB".
std::string_view dataset_label(Domain d);

enum class Origin { UserExplicit, SystemExplicit, Implicit };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

// A named, task-relevant aspect of an interaction.
class Dimension {
 public:
  // Trims name/value, validates them and the confidence, and derives the id.
  // Throws InvalidInput on a blank name or value, or a confidence that is
  // non-finite or positive.
  static Dimension make(std::string_view name, std::string_view value,
                        std::optional<std::string> justification, Origin origin,
                        std::optional<double> confidence = std::nullopt);

  // Deterministic content id over (name, value).
  static std::string content_id(std::string_view name, std::string_view value);

  const std::string& id() const noexcept { return id_; }
  const std::string& name() const noexcept { return name_; }
  const std::string& value() const noexcept { return value_; }
  const std::optional<std::string>& justification() const noexcept { return justification_; }
  Origin origin() const noexcept { return origin_; }
  const std::optional<double>& confidence() const noexcept { return confidence_; }

  // Ranking treats a missing log-probability as 0.
  double confidence_or_zero() const noexcept { return confidence_.value_or(0.0); }

  Dimension with_confidence(std::optional<double> c) const;
  Dimension with_origin(Origin o) const;

  friend bool operator==(const Dimension&, const Dimension&) = default;

 private:
  Dimension() = default;
  std::string id_;
  std::string name_;
  std::string value_;
  std::optional<std::string> justification_;
  Origin origin_ = Origin::Implicit;
  std::optional<double> confidence_;
};

// {"name","value","justification"} as in the prompt protocols.
nlohmann::json to_wire_json(const Dimension& d);
// Wire fields plus "id", "origin" and (when present) "confidence".
nlohmann::json to_json(const Dimension& d);
Dimension dimension_from_json(const nlohmann::json& j);

using Persona = std::vector<std::pair<std::string, std::string>>;

// "key: value; key: value"
std::string format_persona(const Persona& p);

struct Turn {
  Role role = Role::User;
  std::string text;
};

struct InteractionState {
  std::string query;
  std::vector<Turn> history;
  std::optional<Persona> persona;
  std::optional<std::string> baseline_response;
  Domain domain = Domain::Medical;

  // Throws InvalidInput on a blank query, a blank history turn, a system
  // turn, or two consecutive turns with the same role.
  void validate() const;
};

nlohmann::json to_json(const InteractionState& s);
// A persona may be an object (entries taken in key order) or a list of [key, value] pairs.
InteractionState interaction_state_from_json(const nlohmann::json& j);

enum class EmbeddingTextMode { NameOnly, ValueOnly, NameValue };

std::string_view to_string(EmbeddingTextMode m);
EmbeddingTextMode embedding_text_mode_from_string(std::string_view s);

// Text handed to the embedder for a dimension; NameValue gives "name: value".
std::string embedding_text(const Dimension& d, EmbeddingTextMode mode);

// Decides whether two dimensions denote the same aspect: equal ids, or cosine
// similarity of their embeddings at or above the threshold.
class SemanticMatcher {
 public:
  static constexpr double kDefaultThreshold = 0.85;

  SemanticMatcher(std::shared_ptr<const EmbeddingProvider> embedder,
                  double threshold = kDefaultThreshold,
                  EmbeddingTextMode mode = EmbeddingTextMode::NameValue);

  double threshold() const noexcept { return threshold_; }
  EmbeddingTextMode text_mode() const noexcept { return mode_; }
  const EmbeddingProvider& embedder() const noexcept { return *embedder_; }

  EmbeddingVector embed(const Dimension& d) const;
  std::vector<EmbedOutcome> embed_all(const std::vector<Dimension>& dims) const;
  bool matches(const Dimension& a, const Dimension& b) const;

 private:
  std::shared_ptr<const EmbeddingProvider> embedder_;
  double threshold_;
  EmbeddingTextMode mode_;
};

struct ActivationPool {
  std::vector<Dimension> unmet_explicit;
  std::vector<Dimension> implicit_candidates;
  std::map<std::string, EmbeddingVector> embeddings;
  std::vector<std::string> warnings;

  const EmbeddingVector& embedding_of(const std::string& id) const;
  // Throws InvalidState when an id is duplicated or lacks an embedding.
  void validate() const;
};

// User-explicit dimensions not covered by any system-explicit dimension.
// Preserves input order.
std::vector<Dimension> unmet_explicit(const std::vector<Dimension>& user_exp,
                                      const std::vector<Dimension>& sys_exp,
                                      const SemanticMatcher& matcher);

struct PoolOptions {
  static constexpr double kDefaultDedupeThreshold = 0.95;
  double dedupe_threshold = kDefaultDedupeThreshold;
};

// Drops near-duplicate candidates (cosine >= threshold or equal id). Of two
// duplicates the higher-confidence one survives; ties keep the earlier one.
// Survivors keep their input order.
std::vector<Dimension> dedupe_candidates(const std::vector<Dimension>& candidates,
                                         const std::map<std::string, EmbeddingVector>& embeddings,
                                         double threshold);

ActivationPool build_activation_pool(const InteractionState& state,
                                     const std::vector<Dimension>& user_exp,
                                     const std::vector<Dimension>& sys_exp,
                                     const std::vector<Dimension>& implicit,
                                     const SemanticMatcher& matcher,
                                     const PoolOptions& options = {});

}  // namespace proper
