#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace proper::cli {

struct PipelineOptions {
  std::string config;
  std::string input;
  std::string out;
  std::string variant = "proper";
  std::optional<int> k;
  bool timings = false;
};

struct DatasetOptions {
  std::string config;
  std::string dataset;
  std::string dump;
  std::string out;
  std::uint64_t seed = 13;
  bool seed_given = false;
  bool splits_only = false;
  std::string template_style = "llama3";
};

struct EvalOptions {
  std::string config;
  std::string input;
  std::string traces_a;
  std::string traces_b;
  std::string out;
  std::string label_a = "A";
  std::string label_b = "B";
  std::string presets = "reference";
};

int run_pipeline(const PipelineOptions& o);
int run_dataset_build(const DatasetOptions& o);
int run_eval_pairwise(const EvalOptions& o);
int run_eval_sweep(const EvalOptions& o);
int run_eval_multiturn(const EvalOptions& o);

}  // namespace proper::cli
