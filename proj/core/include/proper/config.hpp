#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "proper/agents.hpp"
#include "proper/chat.hpp"
#include "proper/embeddings.hpp"
#include "proper/replay_cache.hpp"

namespace proper {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kConfigEnv = "PROPER_CONFIG";
inline constexpr const char* kCacheDirEnv = "PROPER_CACHE_DIR";
inline constexpr const char* kDefaultTokenEnv = "PROPER_API_TOKEN";

struct ProviderSettings {
  std::string endpoint;
  std::string token_env = kDefaultTokenEnv;
  std::string auth_token;  // resolved from token_env at load
  int timeout_ms = 120000;
  bool supports_logprobs = true;
  int max_in_flight = 4;
  double requests_per_second = 0.0;
  RetryPolicy retry;
};

struct EmbedderSettings {
  std::string kind = "mock";  // "mock" | "remote"
  std::uint64_t seed = MockEmbedder::kDefaultSeed;
  std::size_t dimension = MockEmbedder::kDefaultDimension;
  std::string endpoint;
  std::string model;
  std::string token_env = kDefaultTokenEnv;
  std::string auth_token;
};

struct CacheSettings {
  CacheMode mode = CacheMode::Replay;
  std::filesystem::path dir;
};

struct RunConfig {
  std::filesystem::path source;  // file the config was read from
  AgentConfig agent;
  ProviderSettings provider;
  EmbedderSettings embedder;
  CacheSettings cache;
  std::uint64_t seed = 13;
  int workers = 1;

  // Throws Configuration for inconsistent settings and missing paths.
  void validate() const;
};

// Parses a config document. Relative paths resolve against `base_dir`.
// PROPER_CACHE_DIR replaces cache.dir; tokens come from the environment
// variables the config names.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Reads `path`, or $PROPER_CONFIG when `path` is empty. Every failure,
// including a missing file, is a Configuration error.
RunConfig load_run_config(const std::filesystem::path& path);

// Effective configuration with tokens replaced by "<redacted>".
nlohmann::json redacted(const RunConfig& cfg);

// Replay: cache only, behind a provider that rejects any network call.
// Record: cache over retries over the concurrency limiter over HTTP.
// Passthrough: retries over the limiter over HTTP.
std::shared_ptr<ChatProvider> make_chat_provider(const RunConfig& cfg);
std::shared_ptr<const EmbeddingProvider> make_embedder(const RunConfig& cfg);

}  // namespace proper
