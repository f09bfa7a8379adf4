#include <catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "proper/embeddings.hpp"
#include "proper/remote_embedder.hpp"

using namespace proper;
using Catch::Approx;

TEST_CASE("normalize yields unit vectors and rejects degenerate input") {
  const auto v = EmbeddingVector::normalize({3.0, 4.0});
  CHECK(v.norm() == Approx(1.0));
  CHECK(v.values()[0] == Approx(0.6));
  CHECK(v.values()[1] == Approx(0.8));
  CHECK_THROWS_AS(EmbeddingVector::normalize({0.0, 0.0}), Error);
  CHECK_THROWS_AS(EmbeddingVector::normalize({}), Error);
  CHECK_THROWS_AS(EmbeddingVector::normalize({NAN, 1.0}), Error);
}

TEST_CASE("cosine of unit vectors") {
  const auto a = EmbeddingVector::normalize({1.0, 0.0});
  const auto b = EmbeddingVector::normalize({0.6, 0.8});
  CHECK(cosine(a, b) == Approx(0.6));
  CHECK(cosine(a, a) == Approx(1.0));
  CHECK_THROWS_AS(cosine(a, EmbeddingVector::normalize({1.0, 0.0, 0.0})), Error);
}

TEST_CASE("mock embedder is deterministic and topical") {
  MockEmbedder m(42, 64);
  const auto a = m.embed("low sodium diet plan");
  CHECK(a.dimension() == 64);
  CHECK(a.norm() == Approx(1.0));
  CHECK(a == MockEmbedder(42, 64).embed("low sodium diet plan"));
  CHECK(a == m.embed("Low SODIUM, diet plan!"));
  CHECK_FALSE(a == MockEmbedder(7, 64).embed("low sodium diet plan"));

  const double related = cosine(a, m.embed("low sodium diet"));
  const double unrelated = cosine(a, m.embed("graph traversal recursion"));
  CHECK(related > 0.6);
  CHECK(related > unrelated + 0.3);
  CHECK_THROWS_AS(m.embed("   "), Error);
}

TEST_CASE("embed_batch isolates failures") {
  MockEmbedder m;
  const auto out = m.embed_batch({"alpha", " ", "beta"});
  REQUIRE(out.size() == 3);
  CHECK(std::holds_alternative<EmbeddingVector>(out[0]));
  REQUIRE(std::holds_alternative<Error>(out[1]));
  CHECK(std::get<Error>(out[1]).code() == ErrorCode::InvalidInput);
  CHECK(std::holds_alternative<EmbeddingVector>(out[2]));
}

namespace {

class CountingEmbedder final : public EmbeddingProvider {
 public:
  std::string name() const override { return "counting"; }
  std::size_t dimension() const override { return 4; }
  EmbeddingVector embed(std::string_view text) const override {
    ++calls;
    return MockEmbedder(1, 4).embed(text);
  }
  mutable std::atomic<int> calls{0};
};

// Minimal embedding service on an ephemeral port.
class EmbedServer {
 public:
  explicit EmbedServer(std::size_t dim) : dim_(dim) {
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& t : body.at("input")) {
        std::vector<double> row(dim_, 0.0);
        row[t.get<std::string>().size() % dim_] = 2.0;
        row[0] += 1.0;
        rows.push_back(row);
      }
      if (wrong_dimension) rows[0].push_back(1.0);
      res.set_content(nlohmann::json{{"embeddings", rows}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EmbedServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/embed"; }

  std::atomic<int> requests{0};
  std::atomic<int> fail_next{0};
  std::atomic<bool> wrong_dimension{false};
  std::string last_auth;

 private:
  std::size_t dim_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteEmbedderConfig remote_config(const EmbedServer& s) {
  RemoteEmbedderConfig c;
  c.endpoint = s.url();
  c.model = "mini";
  c.auth_token = "secret";
  c.dimension = 4;
  c.timeout = std::chrono::milliseconds(5000);
  c.retry.initial_delay = std::chrono::milliseconds(1);
  return c;
}

}  // namespace

TEST_CASE("caching embedder calls the inner provider once per text") {
  auto inner = std::make_shared<CountingEmbedder>();
  CachingEmbedder c(inner);
  const auto a = c.embed("one two");
  const auto b = c.embed("one two");
  CHECK(a == b);
  c.embed_batch({"one two", "three"});
  CHECK(inner->calls == 2);
}

TEST_CASE("remote embedder round trip") {
  EmbedServer server(4);
  RemoteEmbedder r(remote_config(server));
  const auto v = r.embed("abcdef");
  CHECK(v.dimension() == 4);
  CHECK(v.norm() == Approx(1.0));
  // raw row is (1, 0, 2, 0) before normalization
  CHECK(v.values()[0] == Approx(1.0 / std::sqrt(5.0)));
  CHECK(v.values()[2] == Approx(2.0 / std::sqrt(5.0)));
  CHECK(server.last_auth == "Bearer secret");

  const auto batch = r.embed_batch({"a", "bb", " "});
  REQUIRE(batch.size() == 3);
  CHECK(std::holds_alternative<EmbeddingVector>(batch[0]));
  CHECK(std::holds_alternative<EmbeddingVector>(batch[1]));
  CHECK(std::holds_alternative<Error>(batch[2]));
}

TEST_CASE("remote embedder retries server errors") {
  EmbedServer server(4);
  server.fail_next = 2;
  RemoteEmbedder r(remote_config(server));
  CHECK(r.embed("abc").dimension() == 4);
  CHECK(server.requests == 3);
}

TEST_CASE("remote embedder rejects a wrong dimension") {
  EmbedServer server(4);
  server.wrong_dimension = true;
  RemoteEmbedder r(remote_config(server));
  try {
    r.embed("abc");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderError);
  }
}

TEST_CASE("remote embedder reports an unreachable service") {
  RemoteEmbedderConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/embed";
  c.model = "mini";
  c.dimension = 4;
  c.timeout = std::chrono::milliseconds(500);
  c.retry.max_attempts = 1;
  RemoteEmbedder r(c);
  try {
    r.embed("abc");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Service);
  }
}
