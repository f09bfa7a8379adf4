#include "proper/remote_embedder.hpp"

#include <spdlog/spdlog.h>

#include "http_util.hpp"
#include "proper/text.hpp"

namespace proper {

struct RemoteEmbedder::Impl {
  explicit Impl(int max_in_flight) : limiter(max_in_flight) {}
  mutable InFlightLimiter limiter;
};

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_.max_in_flight)) {
  if (config_.endpoint.empty()) fail(ErrorCode::Configuration, "remote embedder needs an endpoint");
  if (config_.dimension == 0) fail(ErrorCode::Configuration, "remote embedder dimension must be positive");
  (void)detail::split_url(config_.endpoint);
}

RemoteEmbedder::~RemoteEmbedder() = default;

std::vector<std::vector<double>> RemoteEmbedder::post(const std::vector<std::string>& texts) const {
  const auto url = detail::split_url(config_.endpoint);
  const nlohmann::json body = {{"model", config_.model}, {"input", texts}};

  auto call = [&]() -> std::vector<std::vector<double>> {
    auto permit = impl_->limiter.acquire();
    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.auth_token.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.auth_token);
    }
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res || res->status != 200) detail::throw_http_failure(res, "embedding request");

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::ProviderError, std::string("embedding response is not JSON: ") + e.what());
    }
    if (!parsed.is_object() || !parsed.contains("embeddings") || !parsed["embeddings"].is_array()) {
      fail(ErrorCode::ProviderError, "embedding response lacks an \"embeddings\" array");
    }
    const auto& rows = parsed["embeddings"];
    if (rows.size() != texts.size()) {
      fail(ErrorCode::ProviderError, "embedding response has " + std::to_string(rows.size()) +
                                         " rows for " + std::to_string(texts.size()) + " inputs");
    }
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
      if (!row.is_array()) fail(ErrorCode::ProviderError, "embedding row is not an array");
      std::vector<double> v;
      v.reserve(row.size());
      for (const auto& x : row) {
        if (!x.is_number()) fail(ErrorCode::ProviderError, "embedding row has a non-number");
        v.push_back(x.get<double>());
      }
      out.push_back(std::move(v));
    }
    return out;
  };

  try {
    return with_retries(config_.retry, real_sleep(), call);
  } catch (Error& e) {
    if (e.retry_exhausted()) spdlog::error("embedding provider gave up after {} attempts", e.attempts());
    throw;
  }
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  if (text::is_blank(text)) fail(ErrorCode::InvalidInput, "cannot embed blank text");
  auto rows = post({std::string(text)});
  if (rows.front().size() != config_.dimension) {
    fail(ErrorCode::ProviderError, "provider returned dimension " + std::to_string(rows.front().size()) +
                                       ", declared " + std::to_string(config_.dimension));
  }
  return EmbeddingVector::normalize(std::move(rows.front()));
}

std::vector<EmbedOutcome> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  std::vector<EmbedOutcome> out(texts.size(), EmbedOutcome{Error(ErrorCode::InvalidState, "")});
  std::vector<std::string> valid;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::is_blank(texts[i])) {
      out[i] = Error(ErrorCode::InvalidInput, "cannot embed blank text");
    } else {
      valid.push_back(texts[i]);
      index.push_back(i);
    }
  }
  if (valid.empty()) return out;

  std::vector<std::vector<double>> rows;
  try {
    rows = post(valid);
  } catch (const Error& e) {
    for (auto i : index) out[i] = e;
    return out;
  }
  for (std::size_t j = 0; j < rows.size(); ++j) {
    try {
      if (rows[j].size() != config_.dimension) {
        fail(ErrorCode::ProviderError, "provider returned dimension " + std::to_string(rows[j].size()) +
                                           ", declared " + std::to_string(config_.dimension));
      }
      out[index[j]] = EmbeddingVector::normalize(std::move(rows[j]));
    } catch (const Error& e) {
      out[index[j]] = e;
    }
  }
  return out;
}

}  // namespace proper
