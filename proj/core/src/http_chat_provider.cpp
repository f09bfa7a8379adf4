#include "proper/http_chat_provider.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "http_util.hpp"

namespace proper {

HttpChatProvider::HttpChatProvider(HttpChatConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) fail(ErrorCode::Configuration, "chat provider needs an endpoint");
  (void)detail::split_url(config_.endpoint);
}

nlohmann::json HttpChatProvider::request_body(const ChatRequest& req, bool send_logprobs) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  nlohmann::json body = {{"model", req.model},
                         {"messages", std::move(msgs)},
                         {"temperature", req.temperature},
                         {"max_tokens", req.max_tokens}};
  if (send_logprobs) body["logprobs"] = true;
  return body;
}

ChatResponse HttpChatProvider::parse_response(const std::string& body, bool logprobs_requested) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ProviderError, std::string("chat response is not JSON: ") + e.what());
  }
  if (j.contains("error") && !j["error"].is_null()) {
    fail(ErrorCode::ProviderError, "provider reported an error: " + j["error"].dump());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    fail(ErrorCode::ProviderError, "chat response has no choices");
  }
  const auto& choice = j["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    fail(ErrorCode::ProviderError, "chat response lacks choices[0].message.content");
  }

  ChatResponse resp;
  resp.text = choice["message"]["content"].get<std::string>();
  if (j.contains("model")) resp.provider_meta["model"] = j["model"];
  if (choice.contains("finish_reason")) resp.provider_meta["finish_reason"] = choice["finish_reason"];

  if (logprobs_requested) {
    const bool present = choice.contains("logprobs") && choice["logprobs"].is_object() &&
                         choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array();
    if (present) {
      std::vector<TokenLogprob> tokens;
      for (const auto& t : choice["logprobs"]["content"]) {
        if (!t.contains("token") || !t["token"].is_string() || !t.contains("logprob") ||
            !t["logprob"].is_number()) {
          fail(ErrorCode::ProviderError, "malformed logprob entry");
        }
        tokens.push_back({t["token"].get<std::string>(), std::min(0.0, t["logprob"].get<double>())});
      }
      resp.token_logprobs = std::move(tokens);
    } else {
      resp.logprobs_unavailable = true;
    }
  }
  return resp;
}

ChatResponse HttpChatProvider::complete(const ChatRequest& req) {
  req.validate();
  const bool send_logprobs = req.want_logprobs && config_.supports_logprobs;
  const auto url = detail::split_url(config_.endpoint);

  httplib::Client client(url.origin);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);

  auto res = client.Post(url.path, headers, request_body(req, send_logprobs).dump(), "application/json");
  if (!res || res->status != 200) detail::throw_http_failure(res, "chat request");

  auto resp = parse_response(res->body, req.want_logprobs);
  if (req.want_logprobs && !send_logprobs) resp.logprobs_unavailable = true;
  if (resp.logprobs_unavailable) {
    spdlog::warn("model {} returned no logprobs; confidences fall back to 0", req.model);
  }
  return resp;
}

}  // namespace proper
