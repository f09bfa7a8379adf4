#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "proper/chat.hpp"

namespace proper {

enum class CacheMode { Record, Replay, Passthrough };

std::string_view to_string(CacheMode m);
CacheMode cache_mode_from_string(std::string_view s);

inline constexpr int kCacheVersion = 1;

// One file per request at <dir>/<request_key>.json holding
//   {"cache_version":1,"key":K,"request":<canonical request>,"response":{...}}
nlohmann::json response_to_json(const ChatResponse& r);
ChatResponse response_from_json(const nlohmann::json& j);

// Record: always calls the inner provider and persists the response.
// Replay: serves stored responses; a missing entry is a CacheMiss and the
//         inner provider is never consulted.
// Passthrough: forwards to the inner provider and never touches disk.
class CachedProvider final : public ChatProvider {
 public:
  // `inner` may be null in Replay mode.
  CachedProvider(std::shared_ptr<ChatProvider> inner, std::filesystem::path dir, CacheMode mode);

  std::string name() const override;
  ChatResponse complete(const ChatRequest& req) override;

  CacheMode mode() const noexcept { return mode_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path entry_path(const ChatRequest& req) const;

  // Stored response for `req`, if any.
  std::optional<ChatResponse> lookup(const ChatRequest& req) const;
  void store(const ChatRequest& req, const ChatResponse& resp) const;

 private:
  std::shared_ptr<ChatProvider> inner_;
  std::filesystem::path dir_;
  CacheMode mode_;
};

}  // namespace proper
