#include "proper/error.hpp"

namespace proper {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::Configuration: return "configuration";
    case ErrorCode::InvalidState: return "invalid_state";
    case ErrorCode::Capacity: return "capacity";
    case ErrorCode::MissingStartMarker: return "missing_start_marker";
    case ErrorCode::MissingEndMarker: return "missing_end_marker";
    case ErrorCode::EndBeforeStart: return "end_before_start";
    case ErrorCode::InvalidJson: return "invalid_json";
    case ErrorCode::MissingKey: return "missing_key";
    case ErrorCode::ExtraField: return "extra_field";
    case ErrorCode::TypeMismatch: return "type_mismatch";
    case ErrorCode::EmptyValue: return "empty_value";
    case ErrorCode::ScoreOutOfRange: return "score_out_of_range";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::RateLimited: return "rate_limited";
    case ErrorCode::ProviderError: return "provider_error";
    case ErrorCode::CacheMiss: return "cache_miss";
    case ErrorCode::NetworkForbidden: return "network_forbidden";
    case ErrorCode::Ingestion: return "ingestion";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Input: return "input";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::State: return "state";
    case ErrorCategory::Capacity: return "capacity";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Service: return "service";
    case ErrorCategory::Cache: return "cache";
    case ErrorCategory::Data: return "data";
  }
  return "unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return ErrorCategory::Input;
    case ErrorCode::Configuration: return ErrorCategory::Config;
    case ErrorCode::InvalidState: return ErrorCategory::State;
    case ErrorCode::Capacity: return ErrorCategory::Capacity;
    case ErrorCode::MissingStartMarker:
    case ErrorCode::MissingEndMarker:
    case ErrorCode::EndBeforeStart:
    case ErrorCode::InvalidJson:
    case ErrorCode::MissingKey:
    case ErrorCode::ExtraField:
    case ErrorCode::TypeMismatch:
    case ErrorCode::EmptyValue:
    case ErrorCode::ScoreOutOfRange: return ErrorCategory::Parse;
    case ErrorCode::Transport:
    case ErrorCode::Timeout:
    case ErrorCode::RateLimited:
    case ErrorCode::ProviderError:
    case ErrorCode::NetworkForbidden: return ErrorCategory::Service;
    case ErrorCode::CacheMiss: return ErrorCategory::Cache;
    case ErrorCode::Ingestion:
    case ErrorCode::Io: return ErrorCategory::Data;
  }
  return ErrorCategory::Input;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

bool Error::retryable() const noexcept {
  return code_ == ErrorCode::Transport || code_ == ErrorCode::Timeout ||
         code_ == ErrorCode::RateLimited;
}

Error& Error::with_path(std::string path) {
  path_ = std::move(path);
  return *this;
}

Error& Error::with_raw(std::string raw) {
  raw_ = std::move(raw);
  return *this;
}

Error& Error::with_stage(std::string stage) {
  stage_ = std::move(stage);
  return *this;
}

Error& Error::with_attempts(int attempts, bool exhausted) {
  attempts_ = attempts;
  retry_exhausted_ = exhausted;
  return *this;
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace proper
