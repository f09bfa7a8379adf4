#include "common.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <thread>

#include "proper/text.hpp"

namespace proper::cli {

namespace {
volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_signal(int) { g_interrupted = 1; }
}  // namespace

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Input:
    case ErrorCategory::Config: return kUsage;
    case ErrorCategory::Service: return kService;
    case ErrorCategory::Cache:
    case ErrorCategory::Data:
    case ErrorCategory::Parse:
    case ErrorCategory::State:
    case ErrorCategory::Capacity: return kData;
  }
  return kData;
}

bool unreachable(ErrorCode code) {
  return code == ErrorCode::Transport || code == ErrorCode::Timeout || code == ErrorCode::NetworkForbidden;
}

void setup_logging(bool verbose) {
  auto logger = spdlog::stderr_color_mt("proper");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

void install_interrupt_handler() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

bool interrupted() { return g_interrupted != 0; }

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<JsonLine> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::is_blank(line)) continue;
    JsonLine jl;
    jl.line = n;
    try {
      jl.value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      jl.error = e.what();
    }
    out.push_back(std::move(jl));
  }
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  text::atomic_write_file(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& s) { text::atomic_write_file(path, s); }

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

std::string file_stem(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

Sample sample_from_json(const nlohmann::json& j, Domain fallback) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "sample must be a JSON object");
  if (!j.contains("id") || !j["id"].is_string() || text::is_blank(j["id"].get<std::string>())) {
    fail(ErrorCode::InvalidInput, "sample needs a non-empty string \"id\"");
  }
  if (!j.contains("state")) fail(ErrorCode::InvalidInput, "sample needs a \"state\" object");
  Sample s;
  s.id = j["id"].get<std::string>();
  auto state = j["state"];
  if (state.is_object() && !state.contains("domain")) state["domain"] = std::string(to_string(fallback));
  s.state = interaction_state_from_json(state);
  if (j.contains("dataset")) {
    if (!j["dataset"].is_string()) fail(ErrorCode::InvalidInput, "\"dataset\" must be a string");
    s.dataset = j["dataset"].get<std::string>();
  } else {
    s.dataset = std::string(dataset_label(s.state.domain));
  }
  return s;
}

RunConfig load_config_logged(const std::string& path) {
  auto cfg = load_run_config(path);
  spdlog::info("effective config: {}", redacted(cfg).dump());
  return cfg;
}

void run_parallel(std::size_t n, int workers, const std::atomic<bool>& stop,
                  const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      if (interrupted() || stop.load()) return;
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  if (count == 1 || n <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(count, n); ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

}  // namespace proper::cli
