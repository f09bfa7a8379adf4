#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "proper/chat.hpp"
#include "proper/embeddings.hpp"

namespace proper {

struct RemoteEmbedderConfig {
  // Full URL, e.g. "http://127.0.0.1:8080/v1/embed".
  std::string endpoint;
  std::string model;
  std::string auth_token;
  std::size_t dimension = 384;
  std::chrono::milliseconds timeout{30000};
  int max_in_flight = 4;
  RetryPolicy retry;
};

// JSON exchange {"model": m, "input": [texts]} -> {"embeddings": [[reals]]}.
// Returned vectors are re-normalized and checked against the declared dimension.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig config);
  ~RemoteEmbedder() override;

  std::string name() const override { return "remote:" + config_.model; }
  std::size_t dimension() const override { return config_.dimension; }
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbedOutcome> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  std::vector<std::vector<double>> post(const std::vector<std::string>& texts) const;

  RemoteEmbedderConfig config_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace proper
