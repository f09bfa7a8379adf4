#include <spdlog/spdlog.h>

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>

#include "commands.hpp"
#include "common.hpp"
#include "proper/agents.hpp"
#include "proper/text.hpp"

namespace proper::cli {

int run_pipeline(const PipelineOptions& o) {
  auto cfg = load_config_logged(o.config);
  const auto variant = ablation_from_string(o.variant);
  if (o.k) cfg.agent.rerank.k = *o.k;
  if (o.timings) cfg.agent.record_timings = true;
  cfg.agent.validate();

  const auto lines = read_jsonl(o.input);
  const std::filesystem::path out(o.out);
  ensure_dir(out);

  const Agents agents(make_chat_provider(cfg), make_embedder(cfg), cfg.agent);

  std::atomic<std::size_t> succeeded{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> stop{false};
  std::atomic<bool> service_down{false};
  std::mutex ids_mutex;
  std::set<std::string> ids;

  auto record_error = [&](const std::string& stem, nlohmann::json body) {
    write_json(out / (stem + ".error.json"), body);
    ++failed;
  };

  run_parallel(lines.size(), cfg.workers, stop, [&](std::size_t i) {
    const auto& line = lines[i];
    const std::string fallback_stem = "line-" + std::to_string(line.line);
    try {
      if (!line.error.empty()) {
        record_error(fallback_stem, {{"line", line.line}, {"error", "invalid JSON: " + line.error}});
        spdlog::error("{}: line {} is not valid JSON", o.input, line.line);
        return;
      }
      Sample sample;
      try {
        sample = sample_from_json(line.value, cfg.agent.domain);
      } catch (const Error& e) {
        record_error(fallback_stem, {{"line", line.line}, {"error", e.what()}, {"code", to_string(e.code())}});
        spdlog::error("{}: line {}: {}", o.input, line.line, e.what());
        return;
      }
      {
        std::lock_guard lock(ids_mutex);
        if (!ids.insert(sample.id).second) {
          record_error(fallback_stem, {{"line", line.line}, {"error", "duplicate sample id " + sample.id}});
          spdlog::error("{}: line {}: duplicate sample id {}", o.input, line.line, sample.id);
          return;
        }
      }
      const auto trace = agents.run_ablation(sample.state, variant, sample.id);
      auto j = to_json(trace);
      j["dataset"] = sample.dataset;
      const auto stem = file_stem(sample.id);
      if (trace.ok()) {
        write_json(out / (stem + ".trace.json"), j);
        ++succeeded;
      } else {
        record_error(stem, j);
        if (unreachable(trace.failure->code)) {
          service_down = true;
          stop = true;
        }
      }
    } catch (const std::exception& e) {
      // Write failures and other surprises still count against the sample.
      spdlog::error("line {}: {}", line.line, e.what());
      ++failed;
    }
  });

  const auto total = lines.size();
  const auto skipped = total - succeeded.load() - failed.load();
  std::cout << "pipeline: " << total << " samples, " << succeeded.load() << " succeeded, " << failed.load()
            << " failed";
  if (skipped > 0) std::cout << ", " << skipped << " not run";
  std::cout << "\n";

  if (service_down) {
    spdlog::error("provider unreachable; run aborted");
    return kService;
  }
  if (interrupted()) {
    spdlog::warn("interrupted; {} of {} samples processed", succeeded.load() + failed.load(), total);
    return kPartial;
  }
  return failed.load() > 0 || skipped > 0 ? kPartial : kOk;
}

}  // namespace proper::cli
