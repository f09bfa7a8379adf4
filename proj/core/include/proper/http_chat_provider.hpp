#pragma once

#include <chrono>
#include <string>

#include "proper/chat.hpp"

namespace proper {

struct HttpChatConfig {
  // Full URL of an OpenAI-compatible chat-completions route,
  // e.g. "https://api.example.com/v1/chat/completions".
  std::string endpoint;
  std::string auth_token;
  std::chrono::milliseconds timeout{120000};
  // When false, logprob requests are downgraded: the field is not sent and
  // the response is flagged logprobs_unavailable.
  bool supports_logprobs = true;
};

// One request per complete() call. Failures map onto Transport, Timeout,
// RateLimited and ProviderError; retries are layered on with RetryingProvider.
class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpChatConfig config);

  std::string name() const override { return "http"; }
  ChatResponse complete(const ChatRequest& req) override;

  // Exposed for tests.
  static nlohmann::json request_body(const ChatRequest& req, bool send_logprobs);
  static ChatResponse parse_response(const std::string& body, bool logprobs_requested);

 private:
  HttpChatConfig config_;
};

}  // namespace proper
