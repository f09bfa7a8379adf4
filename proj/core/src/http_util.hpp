#pragma once

#include <string>
#include <string_view>

#include <httplib.h>

#include "proper/error.hpp"

namespace proper::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline SplitUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    fail(ErrorCode::Configuration, "endpoint '" + std::string(url) + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

// Maps transport-level and HTTP status failures onto the library's error codes.
[[noreturn]] inline void throw_http_failure(const httplib::Result& res, std::string_view what) {
  if (!res) {
    const auto err = res.error();
    const std::string detail = std::string(what) + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      fail(ErrorCode::Timeout, detail);
    }
    fail(ErrorCode::Transport, detail);
  }
  const int status = res->status;
  std::string body = res->body.substr(0, 512);
  const std::string detail = std::string(what) + ": HTTP " + std::to_string(status) + " " + body;
  if (status == 429) fail(ErrorCode::RateLimited, detail);
  if (status >= 500) fail(ErrorCode::Transport, detail);
  fail(ErrorCode::ProviderError, detail);
}

}  // namespace proper::detail
