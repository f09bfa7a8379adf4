#include "proper/replay_cache.hpp"

#include "proper/text.hpp"

namespace proper {

std::string_view to_string(CacheMode m) {
  switch (m) {
    case CacheMode::Record: return "record";
    case CacheMode::Replay: return "replay";
    case CacheMode::Passthrough: return "passthrough";
  }
  return "passthrough";
}

CacheMode cache_mode_from_string(std::string_view s) {
  if (s == "record") return CacheMode::Record;
  if (s == "replay") return CacheMode::Replay;
  if (s == "passthrough") return CacheMode::Passthrough;
  fail(ErrorCode::Configuration, "unknown cache mode '" + std::string(s) + "'");
}

nlohmann::json response_to_json(const ChatResponse& r) {
  nlohmann::json j = {{"text", r.text},
                      {"provider_meta", r.provider_meta},
                      {"logprobs_unavailable", r.logprobs_unavailable}};
  if (r.token_logprobs) {
    auto arr = nlohmann::json::array();
    for (const auto& t : *r.token_logprobs) arr.push_back({{"token", t.token}, {"logprob", t.logprob}});
    j["token_logprobs"] = std::move(arr);
  } else {
    j["token_logprobs"] = nullptr;
  }
  return j;
}

ChatResponse response_from_json(const nlohmann::json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.provider_meta = j.value("provider_meta", nlohmann::json::object());
  r.logprobs_unavailable = j.value("logprobs_unavailable", false);
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
    std::vector<TokenLogprob> tokens;
    for (const auto& t : j["token_logprobs"]) {
      tokens.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
    }
    r.token_logprobs = std::move(tokens);
  }
  return r;
}

CachedProvider::CachedProvider(std::shared_ptr<ChatProvider> inner, std::filesystem::path dir, CacheMode mode)
    : inner_(std::move(inner)), dir_(std::move(dir)), mode_(mode) {
  if (mode_ != CacheMode::Replay && !inner_) {
    fail(ErrorCode::Configuration, "cache mode " + std::string(to_string(mode_)) + " needs a provider");
  }
  if (mode_ != CacheMode::Passthrough && dir_.empty()) {
    fail(ErrorCode::Configuration, "cache mode " + std::string(to_string(mode_)) + " needs a directory");
  }
}

std::string CachedProvider::name() const {
  return std::string("cache:") + std::string(to_string(mode_)) + (inner_ ? ":" + inner_->name() : "");
}

std::filesystem::path CachedProvider::entry_path(const ChatRequest& req) const {
  return dir_ / (request_key(req) + ".json");
}

std::optional<ChatResponse> CachedProvider::lookup(const ChatRequest& req) const {
  const auto path = entry_path(req);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;

  nlohmann::json entry;
  try {
    entry = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    Error err(ErrorCode::Io, "corrupt cache entry " + path.string() + ": " + e.what());
    err.with_path(path.string());
    throw err;
  }
  if (entry.value("cache_version", 0) != kCacheVersion) {
    fail(ErrorCode::Io, "cache entry " + path.string() + " has an unsupported version");
  }
  if (entry.value("request", nlohmann::json()) != canonical_request(req)) {
    fail(ErrorCode::Io, "cache entry " + path.string() + " does not match its request");
  }
  try {
    return response_from_json(entry.at("response"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, "corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void CachedProvider::store(const ChatRequest& req, const ChatResponse& resp) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::Io, "cannot create cache directory " + dir_.string() + ": " + ec.message());
  const nlohmann::json entry = {{"cache_version", kCacheVersion},
                                {"key", request_key(req)},
                                {"request", canonical_request(req)},
                                {"response", response_to_json(resp)}};
  text::atomic_write_file(entry_path(req), entry.dump(2) + "\n");
}

ChatResponse CachedProvider::complete(const ChatRequest& req) {
  req.validate();
  switch (mode_) {
    case CacheMode::Passthrough:
      return inner_->complete(req);
    case CacheMode::Replay: {
      auto hit = lookup(req);
      if (!hit) {
        Error e(ErrorCode::CacheMiss, "no cached response for request " + request_key(req) + " in " +
                                          dir_.string());
        e.with_path(entry_path(req).string());
        throw e;
      }
      return *hit;
    }
    case CacheMode::Record: {
      auto resp = inner_->complete(req);
      store(req, resp);
      return resp;
    }
  }
  fail(ErrorCode::InvalidState, "unknown cache mode");
}

}  // namespace proper
