#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/error.hpp"

namespace proper {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct Message {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  bool want_logprobs = false;

  // Throws InvalidInput when the request cannot be sent.
  void validate() const;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatResponse {
  std::string text;
  // Present only when requested and supplied by the provider.
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  nlohmann::json provider_meta = nlohmann::json::object();
  // Set when logprobs were requested but the provider could not supply them.
  bool logprobs_unavailable = false;
  int attempts = 1;
};

// Canonical request serialization used for cache keys and request ids:
// a JSON object with keys sorted bytewise and no insignificant whitespace,
//   {"max_tokens":N,"messages":[{"content":S,"role":R},...],
//    "model":S,"temperature":X,"want_logprobs":B}
// where R is "system" | "user" | "assistant". Strings are stored unmodified.
nlohmann::json canonical_request(const ChatRequest& req);
std::string canonical_request_string(const ChatRequest& req);

// Lowercase hex SHA-256 of canonical_request_string(req).
std::string request_key(const ChatRequest& req);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string name() const = 0;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_before(int attempt) const;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;
SleepFn real_sleep();

// Runs `fn` until it succeeds, a non-retryable Error escapes, or the attempt
// cap is hit. The final Error is tagged with the attempt count and whether
// retries were exhausted.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, const SleepFn& sleep, Fn&& fn, int* attempts_out = nullptr)
    -> decltype(fn()) {
  const int cap = policy.max_attempts < 1 ? 1 : policy.max_attempts;
  for (int attempt = 1;; ++attempt) {
    try {
      auto result = fn();
      if (attempts_out) *attempts_out = attempt;
      return result;
    } catch (Error& e) {
      if (!e.retryable() || attempt >= cap) {
        if (attempts_out) *attempts_out = attempt;
        e.with_attempts(attempt, e.retryable());
        throw;
      }
      if (sleep) sleep(policy.delay_before(attempt + 1));
    }
  }
}

// Retries transient provider failures (transport, timeout, HTTP 429/5xx)
// with exponential backoff.
class RetryingProvider final : public ChatProvider {
 public:
  RetryingProvider(std::shared_ptr<ChatProvider> inner, RetryPolicy policy,
                   SleepFn sleep = real_sleep());

  std::string name() const override { return inner_->name(); }
  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::shared_ptr<ChatProvider> inner_;
  RetryPolicy policy_;
  SleepFn sleep_;
};

// Caps concurrent requests and spaces request starts.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int max_in_flight, double requests_per_second = 0.0);

  class Permit {
   public:
    explicit Permit(InFlightLimiter& owner);
    ~Permit();
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    InFlightLimiter& owner_;
  };

  Permit acquire() { return Permit(*this); }
  int max_in_flight() const noexcept { return max_in_flight_; }

 private:
  int max_in_flight_;
  std::counting_semaphore<1024> slots_;
  std::chrono::nanoseconds min_spacing_{0};
  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point next_start_{};
};

class LimitedProvider final : public ChatProvider {
 public:
  LimitedProvider(std::shared_ptr<ChatProvider> inner, std::shared_ptr<InFlightLimiter> limiter);

  std::string name() const override { return inner_->name(); }
  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::shared_ptr<ChatProvider> inner_;
  std::shared_ptr<InFlightLimiter> limiter_;
};

// Stand-in for the network in replay runs: any call is an error.
class NetworkForbiddenProvider final : public ChatProvider {
 public:
  std::string name() const override { return "network-forbidden"; }
  ChatResponse complete(const ChatRequest& req) override;
};

}  // namespace proper
