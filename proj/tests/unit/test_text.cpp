#include <catch_amalgamated.hpp>

#include <filesystem>

#include "proper/error.hpp"
#include "proper/text.hpp"

using namespace proper;
namespace fs = std::filesystem;

TEST_CASE("trim and blank detection") {
  CHECK(text::trim("  a b \n\t") == "a b");
  CHECK(text::trim("") == "");
  CHECK(text::trim_newlines("\n\n x \n") == " x ");
  CHECK(text::is_blank(" \t\n"));
  CHECK_FALSE(text::is_blank(" x "));
  CHECK(text::to_lower("AbC-9") == "abc-9");
}

TEST_CASE("token and word splitting") {
  CHECK(text::alnum_tokens("Hello, World! x2-y") == std::vector<std::string>{"hello", "world", "x2", "y"});
  const auto w = text::words("  one\ttwo\nthree  ");
  REQUIRE(w.size() == 3);
  CHECK(w[2] == "three");
  CHECK(text::words("").empty());
}

TEST_CASE("hashes match published vectors") {
  CHECK(text::hex64(text::fnv1a64("hello")) == "a430d84680aabd0b");
  CHECK(text::hex64(text::fnv1a64("")) == "cbf29ce484222325");
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("format_real always carries a fraction") {
  CHECK(text::format_real(8.0) == "8.0");
  CHECK(text::format_real(0.0) == "0.0");
  CHECK(text::format_real(0.5) == "0.5");
  CHECK(text::format_real(0.2) == "0.2");
  CHECK(text::format_real(-3.0) == "-3.0");
  CHECK(text::format_real(0.1 + 0.2) == "0.30000000000000004");
}

TEST_CASE("join") {
  CHECK(text::join({}, ", ").empty());
  CHECK(text::join({"a", "b", "c"}, ", ") == "a, b, c");
}

TEST_CASE("atomic write replaces contents and leaves no temp file") {
  const fs::path dir = fs::path(PROPER_TEST_TMP) / "atomic";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto file = dir / "out.txt";
  text::atomic_write_file(file, "first");
  text::atomic_write_file(file, "second\n");
  CHECK(text::read_file(file) == "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("reading a missing file is an Io error") {
  try {
    text::read_file(fs::path(PROPER_TEST_TMP) / "does-not-exist");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("error categories and retryability") {
  CHECK(category_of(ErrorCode::MissingEndMarker) == ErrorCategory::Parse);
  CHECK(category_of(ErrorCode::Transport) == ErrorCategory::Service);
  CHECK(category_of(ErrorCode::CacheMiss) == ErrorCategory::Cache);
  CHECK(category_of(ErrorCode::Ingestion) == ErrorCategory::Data);
  CHECK(category_of(ErrorCode::Configuration) == ErrorCategory::Config);
  CHECK(Error(ErrorCode::Timeout, "t").retryable());
  CHECK(Error(ErrorCode::RateLimited, "r").retryable());
  CHECK_FALSE(Error(ErrorCode::ProviderError, "p").retryable());
  CHECK_FALSE(Error(ErrorCode::CacheMiss, "c").retryable());

  Error e(ErrorCode::MissingKey, "m");
  e.with_path("a.b").with_raw("raw").with_stage("dga").with_attempts(2, true);
  CHECK(e.path() == "a.b");
  CHECK(e.raw_text() == "raw");
  CHECK(e.stage() == "dga");
  CHECK(e.attempts() == 2);
  CHECK(e.retry_exhausted());
  CHECK(to_string(ErrorCode::ScoreOutOfRange) == "score_out_of_range");
}
