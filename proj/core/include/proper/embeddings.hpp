#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "proper/error.hpp"

namespace proper {

// A unit-length embedding. The only way to build one is through normalize(),
// so every instance satisfies |v|_2 = 1 up to rounding.
class EmbeddingVector {
 public:
  static EmbeddingVector normalize(std::vector<double> raw);

  std::size_t dimension() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double norm() const noexcept;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

// Dot product of two unit vectors. Throws InvalidInput on dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

using EmbedOutcome = std::variant<EmbeddingVector, Error>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;

  // Throws InvalidInput for blank text.
  virtual EmbeddingVector embed(std::string_view text) const = 0;

  // One outcome per input; a failing item does not affect the others.
  virtual std::vector<EmbedOutcome> embed_batch(const std::vector<std::string>& texts) const;
};

// Offline deterministic embedder: every lowercase alphanumeric token is mapped
// to a pseudo-random vector drawn from a generator seeded by (seed, token);
// a text's embedding is the normalized sum over its tokens. Texts that share
// tokens land close together, which is enough topical signal for tests.
class MockEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimension = 64;
  static constexpr std::uint64_t kDefaultSeed = 42;

  explicit MockEmbedder(std::uint64_t seed = kDefaultSeed,
                        std::size_t dimension = kDefaultDimension);

  std::string name() const override { return "mock"; }
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::uint64_t seed_;
  std::size_t dimension_;
};

// Memoizes another provider. Safe to share between threads.
class CachingEmbedder final : public EmbeddingProvider {
 public:
  explicit CachingEmbedder(std::shared_ptr<const EmbeddingProvider> inner);

  std::string name() const override { return inner_->name(); }
  std::size_t dimension() const override { return inner_->dimension(); }
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbedOutcome> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, EmbeddingVector, std::less<>> cache_;
};

}  // namespace proper
