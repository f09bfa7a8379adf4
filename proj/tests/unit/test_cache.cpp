#include <catch_amalgamated.hpp>

#include <filesystem>

#include "proper/replay_cache.hpp"
#include "proper/text.hpp"
#include "scripted_provider.hpp"

using namespace proper;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::path(PROPER_TEST_TMP) / name;
  fs::remove_all(dir);
  return dir;
}

ChatRequest request(const std::string& text, bool logprobs = false) {
  ChatRequest r;
  r.model = "m";
  r.messages = {{Role::User, text}};
  r.want_logprobs = logprobs;
  return r;
}

class CountingProvider final : public ChatProvider {
 public:
  std::string name() const override { return "counting"; }
  ChatResponse complete(const ChatRequest& req) override {
    ++calls;
    ChatResponse r;
    r.text = "reply " + std::to_string(calls) + " to " + req.messages.back().content;
    if (req.want_logprobs) r.token_logprobs = std::vector<TokenLogprob>{{"re", -0.5}, {"ply", -0.125}};
    return r;
  }
  int calls = 0;
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidState;
}

}  // namespace

TEST_CASE("record then replay serves identical responses without the provider") {
  const auto dir = fresh_dir("record_replay");
  auto inner = std::make_shared<CountingProvider>();
  CachedProvider rec(inner, dir, CacheMode::Record);
  const auto a = rec.complete(request("alpha", true));
  const auto b = rec.complete(request("beta"));
  CHECK(inner->calls == 2);
  CHECK(fs::exists(rec.entry_path(request("alpha", true))));

  CachedProvider replay(nullptr, dir, CacheMode::Replay);
  const auto a2 = replay.complete(request("alpha", true));
  CHECK(a2.text == a.text);
  REQUIRE(a2.token_logprobs);
  CHECK(a2.token_logprobs->at(1).logprob == -0.125);
  CHECK(replay.complete(request("beta")).text == b.text);
  CHECK(code_of([&] { replay.complete(request("gamma")); }) == ErrorCode::CacheMiss);
  // logprob flag is part of the key
  CHECK(code_of([&] { replay.complete(request("beta", true)); }) == ErrorCode::CacheMiss);
}

TEST_CASE("record mode always calls the provider and overwrites") {
  const auto dir = fresh_dir("overwrite");
  auto inner = std::make_shared<CountingProvider>();
  CachedProvider rec(inner, dir, CacheMode::Record);
  rec.complete(request("x"));
  const auto second = rec.complete(request("x"));
  CHECK(inner->calls == 2);
  CHECK(CachedProvider(nullptr, dir, CacheMode::Replay).complete(request("x")).text == second.text);
}

TEST_CASE("passthrough never touches disk") {
  const auto dir = fresh_dir("passthrough");
  auto inner = std::make_shared<CountingProvider>();
  CachedProvider pass(inner, dir, CacheMode::Passthrough);
  pass.complete(request("x"));
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("entry layout stores the canonical request under its key") {
  const auto dir = fresh_dir("layout");
  CachedProvider rec(std::make_shared<CountingProvider>(), dir, CacheMode::Record);
  const auto req = request("layout");
  rec.complete(req);
  const auto entry = nlohmann::json::parse(text::read_file(dir / (request_key(req) + ".json")));
  CHECK(entry["cache_version"] == 1);
  CHECK(entry["key"] == request_key(req));
  CHECK(entry["request"] == canonical_request(req));
  CHECK(entry["response"]["token_logprobs"].is_null());
}

TEST_CASE("corrupt or mismatched entries are rejected") {
  const auto dir = fresh_dir("corrupt");
  CachedProvider rec(std::make_shared<CountingProvider>(), dir, CacheMode::Record);
  const auto req = request("victim");
  rec.complete(req);
  CachedProvider replay(nullptr, dir, CacheMode::Replay);

  const auto path = replay.entry_path(req);
  auto entry = nlohmann::json::parse(text::read_file(path));
  entry["request"]["model"] = "other";
  text::atomic_write_file(path, entry.dump());
  CHECK(code_of([&] { replay.complete(req); }) == ErrorCode::Io);

  text::atomic_write_file(path, "{ not json");
  CHECK(code_of([&] { replay.complete(req); }) == ErrorCode::Io);
}

TEST_CASE("cache construction rules") {
  CHECK_THROWS_AS(CachedProvider(nullptr, "x", CacheMode::Record), Error);
  CHECK_THROWS_AS(CachedProvider(std::make_shared<CountingProvider>(), "", CacheMode::Replay), Error);
  CHECK(cache_mode_from_string("replay") == CacheMode::Replay);
  CHECK_THROWS_AS(cache_mode_from_string("offline"), Error);
}

TEST_CASE("replayed entries relocate with the directory") {
  const auto dir = fresh_dir("relocate_a");
  const auto moved = fresh_dir("relocate_b");
  CachedProvider rec(std::make_shared<testing::ScriptedProvider>(), dir, CacheMode::Record);
  const auto original = rec.complete(request("move me", true));
  fs::rename(dir, moved);
  const auto replayed = CachedProvider(nullptr, moved, CacheMode::Replay).complete(request("move me", true));
  CHECK(replayed.text == original.text);
}
