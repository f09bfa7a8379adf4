#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace proper {

// Machine-readable failure reasons. Every exception thrown by the library is
// a proper::Error carrying exactly one of these.
enum class ErrorCode {
  InvalidInput,
  Configuration,
  InvalidState,
  Capacity,
  // model-output wire formats
  MissingStartMarker,
  MissingEndMarker,
  EndBeforeStart,
  InvalidJson,
  MissingKey,
  ExtraField,
  TypeMismatch,
  EmptyValue,
  ScoreOutOfRange,
  // chat / embedding providers
  Transport,
  Timeout,
  RateLimited,
  ProviderError,
  CacheMiss,
  NetworkForbidden,
  // files and datasets
  Ingestion,
  Io,
};

enum class ErrorCategory { Input, Config, State, Capacity, Parse, Service, Cache, Data };

std::string_view to_string(ErrorCode code);
std::string_view to_string(ErrorCategory category);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

  // Offending JSON path for schema errors, e.g. "missed_dimensions[0].justification".
  const std::string& path() const noexcept { return path_; }
  // Raw model output that failed to parse, kept for triage.
  const std::string& raw_text() const noexcept { return raw_; }
  // Pipeline stage that raised the error, when known.
  const std::string& stage() const noexcept { return stage_; }
  int attempts() const noexcept { return attempts_; }
  bool retry_exhausted() const noexcept { return retry_exhausted_; }

  // Transient provider failures that a retry may fix.
  bool retryable() const noexcept;

  Error& with_path(std::string path);
  Error& with_raw(std::string raw);
  Error& with_stage(std::string stage);
  Error& with_attempts(int attempts, bool exhausted);

 private:
  ErrorCode code_;
  std::string path_;
  std::string raw_;
  std::string stage_;
  int attempts_ = 0;
  bool retry_exhausted_ = false;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace proper
