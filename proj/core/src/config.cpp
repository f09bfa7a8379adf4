#include "proper/config.hpp"

#include <cstdlib>
#include <initializer_list>
#include <set>

#include "proper/http_chat_provider.hpp"
#include "proper/remote_embedder.hpp"
#include "proper/text.hpp"

namespace proper {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Unknown keys are rejected so that typos do not silently fall back to defaults.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorCode::Configuration, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) fail(ErrorCode::Configuration, "unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::Configuration, where + "." + key + " has the wrong type");
  }
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace

void RunConfig::validate() const {
  agent.validate();
  if (workers < 1) fail(ErrorCode::Configuration, "workers must be >= 1");
  if (cache.mode != CacheMode::Passthrough && cache.dir.empty()) {
    fail(ErrorCode::Configuration, "cache.dir is required in " + std::string(to_string(cache.mode)) + " mode");
  }
  if (cache.mode == CacheMode::Replay) {
    std::error_code ec;
    if (!fs::is_directory(cache.dir, ec)) {
      fail(ErrorCode::Configuration, "replay cache directory " + cache.dir.string() + " does not exist");
    }
  }
  if (cache.mode != CacheMode::Replay && text::is_blank(provider.endpoint)) {
    fail(ErrorCode::Configuration, "provider.endpoint is required outside replay mode");
  }
  if (provider.max_in_flight < 1) fail(ErrorCode::Configuration, "provider.max_in_flight must be >= 1");
  if (provider.timeout_ms <= 0) fail(ErrorCode::Configuration, "provider.timeout_ms must be positive");
  if (embedder.kind != "mock" && embedder.kind != "remote") {
    fail(ErrorCode::Configuration, "embedder.kind must be 'mock' or 'remote'");
  }
  if (cache.mode == CacheMode::Replay && embedder.kind == "remote") {
    fail(ErrorCode::Configuration, "replay mode runs offline and needs the mock embedder");
  }
  if (embedder.dimension == 0) fail(ErrorCode::Configuration, "embedder.dimension must be positive");
  if (embedder.kind == "remote" && (text::is_blank(embedder.endpoint) || text::is_blank(embedder.model))) {
    fail(ErrorCode::Configuration, "a remote embedder needs endpoint and model");
  }
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"config_version", "domain", "provider", "models", "temperatures", "max_tokens", "rerank", "matcher",
              "confidence", "repair_retries", "judge_swap_ab", "record_timings", "embedder", "cache", "seed",
              "workers"});
  int version = 0;
  read(j, "config_version", "config", version);
  if (version != kConfigVersion) {
    fail(ErrorCode::Configuration, "config_version must be " + std::to_string(kConfigVersion));
  }

  RunConfig cfg;
  auto& a = cfg.agent;
  std::string s;
  if (j.contains("domain")) {
    read(j, "domain", "config", s);
    try {
      a.domain = domain_from_string(s);
    } catch (const Error& e) {
      fail(ErrorCode::Configuration, e.what());
    }
  }

  if (j.contains("provider")) {
    const auto& p = j["provider"];
    check_keys(p, "provider",
               {"endpoint", "token_env", "timeout_ms", "supports_logprobs", "max_in_flight", "requests_per_second",
                "retry"});
    auto& ps = cfg.provider;
    read(p, "endpoint", "provider", ps.endpoint);
    read(p, "token_env", "provider", ps.token_env);
    read(p, "timeout_ms", "provider", ps.timeout_ms);
    read(p, "supports_logprobs", "provider", ps.supports_logprobs);
    read(p, "max_in_flight", "provider", ps.max_in_flight);
    read(p, "requests_per_second", "provider", ps.requests_per_second);
    if (p.contains("retry")) {
      const auto& r = p["retry"];
      check_keys(r, "provider.retry", {"max_attempts", "initial_delay_ms", "backoff_factor", "max_delay_ms"});
      read(r, "max_attempts", "provider.retry", ps.retry.max_attempts);
      int initial = static_cast<int>(ps.retry.initial_delay.count());
      int max_delay = static_cast<int>(ps.retry.max_delay.count());
      read(r, "initial_delay_ms", "provider.retry", initial);
      read(r, "max_delay_ms", "provider.retry", max_delay);
      read(r, "backoff_factor", "provider.retry", ps.retry.backoff_factor);
      ps.retry.initial_delay = std::chrono::milliseconds(initial);
      ps.retry.max_delay = std::chrono::milliseconds(max_delay);
    }
  }
  cfg.provider.auth_token = env_or_empty(cfg.provider.token_env);

  if (j.contains("models")) {
    const auto& m = j["models"];
    check_keys(m, "models", {"baseline", "dga", "rga", "judge", "annotate"});
    read(m, "baseline", "models", a.models.baseline);
    read(m, "dga", "models", a.models.dga);
    read(m, "rga", "models", a.models.rga);
    read(m, "judge", "models", a.models.judge);
    read(m, "annotate", "models", a.models.annotate);
  }
  if (j.contains("temperatures")) {
    const auto& t = j["temperatures"];
    check_keys(t, "temperatures", {"baseline", "dga", "rga", "judge", "annotate"});
    read(t, "baseline", "temperatures", a.temperatures.baseline);
    read(t, "dga", "temperatures", a.temperatures.dga);
    read(t, "rga", "temperatures", a.temperatures.rga);
    read(t, "judge", "temperatures", a.temperatures.judge);
    read(t, "annotate", "temperatures", a.temperatures.annotate);
  }
  read(j, "max_tokens", "config", a.max_tokens);

  if (j.contains("rerank")) {
    const auto& r = j["rerank"];
    check_keys(r, "rerank", {"k", "preset", "lambda1", "lambda2", "alignment_sign", "pool_mode", "exact_limit"});
    read(r, "k", "rerank", a.rerank.k);
    read(r, "exact_limit", "rerank", a.rerank.exact_limit);
    if (r.contains("preset")) {
      if (r.contains("lambda1") || r.contains("lambda2")) {
        fail(ErrorCode::Configuration, "rerank.preset and explicit lambdas are mutually exclusive");
      }
      read(r, "preset", "rerank", s);
      const auto& preset = preset_by_name(s);
      a.rerank.lambda1 = preset.lambda1;
      a.rerank.lambda2 = preset.lambda2;
    }
    read(r, "lambda1", "rerank", a.rerank.lambda1);
    read(r, "lambda2", "rerank", a.rerank.lambda2);
    if (r.contains("alignment_sign")) {
      read(r, "alignment_sign", "rerank", s);
      a.rerank.alignment_sign = alignment_sign_from_string(s);
    }
    if (r.contains("pool_mode")) {
      read(r, "pool_mode", "rerank", s);
      a.rerank.pool_mode = pool_mode_from_string(s);
    }
  }

  if (j.contains("matcher")) {
    const auto& m = j["matcher"];
    check_keys(m, "matcher", {"threshold", "dedupe_threshold", "embedding_text"});
    read(m, "threshold", "matcher", a.match_threshold);
    read(m, "dedupe_threshold", "matcher", a.dedupe_threshold);
    if (m.contains("embedding_text")) {
      read(m, "embedding_text", "matcher", s);
      try {
        a.embedding_text = embedding_text_mode_from_string(s);
      } catch (const Error& e) {
        fail(ErrorCode::Configuration, e.what());
      }
    }
  }
  if (j.contains("confidence")) {
    read(j, "confidence", "config", s);
    try {
      a.confidence = confidence_mode_from_string(s);
    } catch (const Error& e) {
      fail(ErrorCode::Configuration, e.what());
    }
  }
  read(j, "repair_retries", "config", a.repair_retries);
  read(j, "judge_swap_ab", "config", a.judge_swap_ab);
  read(j, "record_timings", "config", a.record_timings);

  if (j.contains("embedder")) {
    const auto& e = j["embedder"];
    check_keys(e, "embedder", {"kind", "seed", "dimension", "endpoint", "model", "token_env"});
    auto& es = cfg.embedder;
    read(e, "kind", "embedder", es.kind);
    read(e, "seed", "embedder", es.seed);
    read(e, "dimension", "embedder", es.dimension);
    read(e, "endpoint", "embedder", es.endpoint);
    read(e, "model", "embedder", es.model);
    read(e, "token_env", "embedder", es.token_env);
  }
  cfg.embedder.auth_token = env_or_empty(cfg.embedder.token_env);

  if (j.contains("cache")) {
    const auto& c = j["cache"];
    check_keys(c, "cache", {"mode", "dir"});
    if (c.contains("mode")) {
      read(c, "mode", "cache", s);
      cfg.cache.mode = cache_mode_from_string(s);
    }
    std::string dir;
    read(c, "dir", "cache", dir);
    cfg.cache.dir = resolve(dir, base_dir);
  }
  if (const auto env_dir = env_or_empty(kCacheDirEnv); !env_dir.empty()) cfg.cache.dir = env_dir;

  read(j, "seed", "config", cfg.seed);
  read(j, "workers", "config", cfg.workers);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  fs::path p = path;
  if (p.empty()) p = env_or_empty(kConfigEnv);
  if (p.empty()) fail(ErrorCode::Configuration, std::string("no config given and ") + kConfigEnv + " is unset");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) fail(ErrorCode::Configuration, "config file " + p.string() + " not found");
  json j;
  try {
    j = json::parse(text::read_file(p));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Configuration, "config " + p.string() + " is not valid JSON: " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::Configuration, e.what());
  }
  auto cfg = run_config_from_json(j, p.parent_path());
  cfg.source = p;
  return cfg;
}

json redacted(const RunConfig& cfg) {
  const auto& a = cfg.agent;
  auto secret = [](const std::string& t) { return t.empty() ? json(nullptr) : json("<redacted>"); };
  return {
      {"config_version", kConfigVersion},
      {"source", cfg.source.string()},
      {"domain", std::string(to_string(a.domain))},
      {"provider",
       {{"endpoint", cfg.provider.endpoint},
        {"token_env", cfg.provider.token_env},
        {"auth_token", secret(cfg.provider.auth_token)},
        {"timeout_ms", cfg.provider.timeout_ms},
        {"supports_logprobs", cfg.provider.supports_logprobs},
        {"max_in_flight", cfg.provider.max_in_flight},
        {"requests_per_second", cfg.provider.requests_per_second},
        {"retry",
         {{"max_attempts", cfg.provider.retry.max_attempts},
          {"initial_delay_ms", cfg.provider.retry.initial_delay.count()},
          {"backoff_factor", cfg.provider.retry.backoff_factor},
          {"max_delay_ms", cfg.provider.retry.max_delay.count()}}}}},
      {"models",
       {{"baseline", a.models.baseline},
        {"dga", a.models.dga},
        {"rga", a.models.rga},
        {"judge", a.models.judge},
        {"annotate", a.models.annotate}}},
      {"temperatures",
       {{"baseline", a.temperatures.baseline},
        {"dga", a.temperatures.dga},
        {"rga", a.temperatures.rga},
        {"judge", a.temperatures.judge},
        {"annotate", a.temperatures.annotate}}},
      {"max_tokens", a.max_tokens},
      {"rerank",
       {{"k", a.rerank.k},
        {"lambda1", a.rerank.lambda1},
        {"lambda2", a.rerank.lambda2},
        {"alignment_sign", std::string(to_string(a.rerank.alignment_sign))},
        {"pool_mode", std::string(to_string(a.rerank.pool_mode))},
        {"exact_limit", a.rerank.exact_limit}}},
      {"matcher",
       {{"threshold", a.match_threshold},
        {"dedupe_threshold", a.dedupe_threshold},
        {"embedding_text", std::string(to_string(a.embedding_text))}}},
      {"confidence", std::string(to_string(a.confidence))},
      {"repair_retries", a.repair_retries},
      {"judge_swap_ab", a.judge_swap_ab},
      {"record_timings", a.record_timings},
      {"embedder",
       {{"kind", cfg.embedder.kind},
        {"seed", cfg.embedder.seed},
        {"dimension", cfg.embedder.dimension},
        {"endpoint", cfg.embedder.endpoint},
        {"model", cfg.embedder.model},
        {"auth_token", secret(cfg.embedder.auth_token)}}},
      {"cache", {{"mode", std::string(to_string(cfg.cache.mode))}, {"dir", cfg.cache.dir.string()}}},
      {"seed", cfg.seed},
      {"workers", cfg.workers},
  };
}

std::shared_ptr<ChatProvider> make_chat_provider(const RunConfig& cfg) {
  if (cfg.cache.mode == CacheMode::Replay) {
    return std::make_shared<CachedProvider>(std::make_shared<NetworkForbiddenProvider>(), cfg.cache.dir,
                                            CacheMode::Replay);
  }
  HttpChatConfig http;
  http.endpoint = cfg.provider.endpoint;
  http.auth_token = cfg.provider.auth_token;
  http.timeout = std::chrono::milliseconds(cfg.provider.timeout_ms);
  http.supports_logprobs = cfg.provider.supports_logprobs;
  auto limiter = std::make_shared<InFlightLimiter>(cfg.provider.max_in_flight, cfg.provider.requests_per_second);
  std::shared_ptr<ChatProvider> chain = std::make_shared<HttpChatProvider>(std::move(http));
  chain = std::make_shared<LimitedProvider>(std::move(chain), std::move(limiter));
  chain = std::make_shared<RetryingProvider>(std::move(chain), cfg.provider.retry);
  return std::make_shared<CachedProvider>(std::move(chain), cfg.cache.dir, cfg.cache.mode);
}

std::shared_ptr<const EmbeddingProvider> make_embedder(const RunConfig& cfg) {
  std::shared_ptr<const EmbeddingProvider> base;
  if (cfg.embedder.kind == "remote") {
    RemoteEmbedderConfig rc;
    rc.endpoint = cfg.embedder.endpoint;
    rc.model = cfg.embedder.model;
    rc.auth_token = cfg.embedder.auth_token;
    rc.dimension = cfg.embedder.dimension;
    rc.retry = cfg.provider.retry;
    base = std::make_shared<RemoteEmbedder>(std::move(rc));
  } else {
    base = std::make_shared<MockEmbedder>(cfg.embedder.seed, cfg.embedder.dimension);
  }
  return std::make_shared<CachingEmbedder>(std::move(base));
}

}  // namespace proper
