#include "proper/chat.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "proper/text.hpp"

namespace proper {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  fail(ErrorCode::InvalidInput, "unknown chat role '" + std::string(s) + "'");
}

void ChatRequest::validate() const {
  if (text::is_blank(model)) fail(ErrorCode::InvalidInput, "chat request has no model id");
  if (messages.empty()) fail(ErrorCode::InvalidInput, "chat request has no messages");
  if (!std::isfinite(temperature) || temperature < 0.0) {
    fail(ErrorCode::InvalidInput, "temperature must be finite and >= 0");
  }
  if (max_tokens <= 0) fail(ErrorCode::InvalidInput, "max_tokens must be positive");
}

nlohmann::json canonical_request(const ChatRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  // nlohmann::json objects are std::map-backed, so keys serialize sorted.
  return {{"model", req.model},
          {"messages", std::move(msgs)},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens},
          {"want_logprobs", req.want_logprobs}};
}

std::string canonical_request_string(const ChatRequest& req) {
  return canonical_request(req).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string request_key(const ChatRequest& req) {
  return text::sha256_hex(canonical_request_string(req));
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  // attempt 2 waits initial_delay, attempt 3 waits initial_delay * factor, ...
  const double scale = std::pow(backoff_factor, std::max(0, attempt - 2));
  const double ms = static_cast<double>(initial_delay.count()) * scale;
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
}

SleepFn real_sleep() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RetryingProvider::RetryingProvider(std::shared_ptr<ChatProvider> inner, RetryPolicy policy,
                                   SleepFn sleep)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {
  if (!inner_) fail(ErrorCode::Configuration, "retrying provider needs an inner provider");
}

ChatResponse RetryingProvider::complete(const ChatRequest& req) {
  int attempts = 0;
  auto logged_sleep = [&](std::chrono::milliseconds d) {
    spdlog::warn("{}: transient failure, retrying in {} ms", inner_->name(), d.count());
    if (sleep_) sleep_(d);
  };
  auto resp = with_retries(policy_, logged_sleep, [&] { return inner_->complete(req); }, &attempts);
  resp.attempts = attempts;
  resp.provider_meta["attempts"] = attempts;
  if (attempts > 1) spdlog::info("{}: request succeeded after {} attempts", inner_->name(), attempts);
  return resp;
}

InFlightLimiter::InFlightLimiter(int max_in_flight, double requests_per_second)
    : max_in_flight_(max_in_flight), slots_(std::clamp(max_in_flight, 1, 1024)) {
  if (max_in_flight < 1 || max_in_flight > 1024) {
    fail(ErrorCode::Configuration, "max_in_flight must be in [1, 1024]");
  }
  if (requests_per_second < 0.0 || !std::isfinite(requests_per_second)) {
    fail(ErrorCode::Configuration, "requests_per_second must be finite and >= 0");
  }
  if (requests_per_second > 0.0) {
    min_spacing_ = std::chrono::nanoseconds(static_cast<long long>(1e9 / requests_per_second));
  }
}

InFlightLimiter::Permit::Permit(InFlightLimiter& owner) : owner_(owner) {
  owner_.slots_.acquire();
  if (owner_.min_spacing_.count() > 0) {
    std::chrono::steady_clock::time_point start;
    {
      std::lock_guard lock(owner_.pace_mutex_);
      const auto now = std::chrono::steady_clock::now();
      start = std::max(now, owner_.next_start_);
      owner_.next_start_ = start + owner_.min_spacing_;
    }
    std::this_thread::sleep_until(start);
  }
}

InFlightLimiter::Permit::~Permit() { owner_.slots_.release(); }

LimitedProvider::LimitedProvider(std::shared_ptr<ChatProvider> inner,
                                 std::shared_ptr<InFlightLimiter> limiter)
    : inner_(std::move(inner)), limiter_(std::move(limiter)) {
  if (!inner_ || !limiter_) fail(ErrorCode::Configuration, "limited provider needs inner and limiter");
}

ChatResponse LimitedProvider::complete(const ChatRequest& req) {
  auto permit = limiter_->acquire();
  return inner_->complete(req);
}

ChatResponse NetworkForbiddenProvider::complete(const ChatRequest& req) {
  fail(ErrorCode::NetworkForbidden,
       "network access is disabled in replay mode (model " + req.model + ")");
}

}  // namespace proper
