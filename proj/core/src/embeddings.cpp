#include "proper/embeddings.hpp"

#include <cmath>

#include "proper/text.hpp"

namespace proper {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in [-1, 1) from the top 53 bits.
double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
}

}  // namespace

EmbeddingVector EmbeddingVector::normalize(std::vector<double> raw) {
  if (raw.empty()) fail(ErrorCode::InvalidInput, "embedding must have positive dimension");
  double sq = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x)) fail(ErrorCode::InvalidInput, "embedding contains a non-finite value");
    sq += x * x;
  }
  const double n = std::sqrt(sq);
  if (n == 0.0) fail(ErrorCode::InvalidInput, "cannot normalize a zero embedding");
  for (double& x : raw) x /= n;
  return EmbeddingVector(std::move(raw));
}

double EmbeddingVector::norm() const noexcept {
  double sq = 0.0;
  for (double x : values_) sq += x * x;
  return std::sqrt(sq);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    fail(ErrorCode::InvalidInput, "cosine of embeddings with different dimensions (" +
                                      std::to_string(a.dimension()) + " vs " +
                                      std::to_string(b.dimension()) + ")");
  }
  auto x = a.values();
  auto y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  return dot;
}

std::vector<EmbedOutcome> EmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbedOutcome> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    try {
      out.emplace_back(embed(t));
    } catch (const Error& e) {
      out.emplace_back(e);
    }
  }
  return out;
}

MockEmbedder::MockEmbedder(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), dimension_(dimension) {
  if (dimension_ == 0) fail(ErrorCode::Configuration, "mock embedder dimension must be positive");
}

EmbeddingVector MockEmbedder::embed(std::string_view text) const {
  const auto trimmed = text::trim(text);
  if (trimmed.empty()) fail(ErrorCode::InvalidInput, "cannot embed blank text");

  auto tokens = text::alnum_tokens(trimmed);
  // Punctuation-only strings still get a stable vector.
  if (tokens.empty()) tokens.emplace_back(trimmed);

  std::vector<double> acc(dimension_, 0.0);
  for (const auto& tok : tokens) {
    std::uint64_t state = text::fnv1a64(tok) ^ (seed_ * 0x9e3779b97f4a7c15ULL);
    for (auto& x : acc) x += unit_interval(splitmix64(state));
  }
  return EmbeddingVector::normalize(std::move(acc));
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_) fail(ErrorCode::Configuration, "caching embedder needs an inner provider");
}

EmbeddingVector CachingEmbedder::embed(std::string_view text) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(text); it != cache_.end()) return it->second;
  }
  auto v = inner_->embed(text);
  std::lock_guard lock(mutex_);
  cache_.emplace(std::string(text), v);
  return v;
}

std::vector<EmbedOutcome> CachingEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbedOutcome> out(texts.size(), EmbedOutcome{Error(ErrorCode::InvalidState, "")});
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_index;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (auto it = cache_.find(texts[i]); it != cache_.end()) {
        out[i] = it->second;
      } else {
        missing.push_back(texts[i]);
        missing_index.push_back(i);
      }
    }
  }
  if (missing.empty()) return out;
  auto fresh = inner_->embed_batch(missing);
  std::lock_guard lock(mutex_);
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    if (const auto* v = std::get_if<EmbeddingVector>(&fresh[j])) cache_.emplace(missing[j], *v);
    out[missing_index[j]] = std::move(fresh[j]);
  }
  return out;
}

}  // namespace proper
