#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proper/config.hpp"
#include "proper/error.hpp"

namespace proper::cli {

enum Exit : int {
  kOk = 0,
  kPartial = 2,
  kUsage = 64,
  kData = 65,
  kService = 69,
};

int exit_code_for(const Error& e);

// True for failures that mean the provider cannot be reached at all.
bool unreachable(ErrorCode code);

void setup_logging(bool verbose);

// SIGINT/SIGTERM set a flag; workers finish the sample in hand and stop.
void install_interrupt_handler();
bool interrupted();

struct JsonLine {
  std::size_t line = 0;  // 1-based
  nlohmann::json value;
  std::string error;  // set when the line is not valid JSON
};

// Blank lines are skipped. A missing file is an Io error.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
void ensure_dir(const std::filesystem::path& dir);

// File-name-safe form of a sample id.
std::string file_stem(const std::string& id);

struct Sample {
  std::string id;
  std::string dataset;
  InteractionState state;
};

// {"id": S, "dataset"?: S, "state": {...}}. The state's domain defaults to
// `fallback`; the dataset defaults to the domain's report label.
Sample sample_from_json(const nlohmann::json& j, Domain fallback);

RunConfig load_config_logged(const std::string& path);

// Calls fn(i) for i in [0, n) on `workers` threads. Stops handing out work
// once interrupted() or `stop` becomes true.
void run_parallel(std::size_t n, int workers, const std::atomic<bool>& stop,
                  const std::function<void(std::size_t)>& fn);

}  // namespace proper::cli
