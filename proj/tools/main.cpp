#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "common.hpp"

using namespace proper::cli;

int main(int argc, char** argv) {
  CLI::App app{"proper: dimension-calibrated response pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  int code = kOk;
  auto guarded = [&code](auto fn) {
    return [&code, fn] {
      try {
        code = fn();
      } catch (const proper::Error& e) {
        spdlog::error("{} ({})", e.what(), proper::to_string(e.code()));
        code = exit_code_for(e);
      } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        code = kData;
      }
    };
  };

  // pipeline run
  auto* pipeline = app.add_subcommand("pipeline", "Run the response pipeline");
  pipeline->require_subcommand(1);
  PipelineOptions po;
  auto* run = pipeline->add_subcommand("run", "One trace per input sample");
  run->add_option("--config", po.config, "Run config (default: $PROPER_CONFIG)");
  run->add_option("--input", po.input, "Samples, JSON lines")->required();
  run->add_option("--out", po.out, "Trace directory")->required();
  run->add_option("--variant", po.variant, "proper | no_dga | no_reranker | no_rga")
      ->check(CLI::IsMember({"proper", "no_dga", "no_reranker", "no_rga"}));
  run->add_option("--k", po.k, "Override the selection budget")->check(CLI::NonNegativeNumber);
  run->add_flag("--timings", po.timings, "Record stage durations (traces become non-reproducible)");
  run->callback(guarded([&po] { return run_pipeline(po); }));

  // dataset build
  auto* dataset = app.add_subcommand("dataset", "Build supervision datasets");
  dataset->require_subcommand(1);
  DatasetOptions dso;
  auto* build = dataset->add_subcommand("build", "Splits, elicited queries, annotations, fine-tune files");
  build->add_option("--config", dso.config, "Run config (default: $PROPER_CONFIG)");
  build->add_option("--dataset", dso.dataset, "codecontests | md | pwab")->required();
  build->add_option("--dump", dso.dump, "Dump directory or file")->required();
  build->add_option("--seed", dso.seed, "Split seed")->required();
  build->add_option("--out", dso.out, "Output directory")->required();
  build->add_flag("--splits-only", dso.splits_only, "Stop after writing splits; no model calls");
  build->add_option("--template", dso.template_style, "Chat template of the fine-tune manifest")
      ->check(CLI::IsMember({"llama3", "qwen"}));
  build->callback(guarded([&dso] { return run_dataset_build(dso); }));

  // eval
  auto* eval = app.add_subcommand("eval", "Judge-based evaluation");
  eval->require_subcommand(1);
  EvalOptions eo;
  auto* pairwise = eval->add_subcommand("pairwise", "muScore / Win% / p over judged pairs");
  pairwise->add_option("--config", eo.config, "Run config (default: $PROPER_CONFIG)");
  pairwise->add_option("--input", eo.input, "Pairs, JSON lines {id,dataset,query,response_a,response_b}");
  pairwise->add_option("--traces-a", eo.traces_a, "Trace directory for side A");
  pairwise->add_option("--traces-b", eo.traces_b, "Trace directory for side B");
  pairwise->add_option("--label-a", eo.label_a, "Column label of side A");
  pairwise->add_option("--label-b", eo.label_b, "Column label of side B");
  pairwise->add_option("--out", eo.out, "Report directory")->required();
  pairwise->callback(guarded([&eo] { return run_eval_pairwise(eo); }));

  auto* sweep = eval->add_subcommand("sweep", "Preset x dataset muScore grid");
  sweep->add_option("--config", eo.config, "Run config (default: $PROPER_CONFIG)");
  sweep->add_option("--input", eo.input, "Samples, JSON lines")->required();
  sweep->add_option("--presets", eo.presets,
                    "'reference' (alias 'paper'), 'l1,l2;l1,l2', or preset names separated by ';'");
  sweep->add_option("--out", eo.out, "Report directory")->required();
  sweep->callback(guarded([&eo] { return run_eval_sweep(eo); }));

  auto* multiturn = eval->add_subcommand("multiturn", "Whole-conversation dominance counts");
  multiturn->add_option("--config", eo.config, "Run config (default: $PROPER_CONFIG)");
  multiturn->add_option("--input", eo.input, "Conversations, JSON lines")->required();
  multiturn->add_option("--out", eo.out, "Report directory")->required();
  multiturn->callback(guarded([&eo] { return run_eval_multiturn(eo); }));

  // Logging is configured before parsing because command callbacks run inside parse().
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "-v" || arg == "--verbose") verbose = true;
  }
  setup_logging(verbose);
  install_interrupt_handler();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  return code;
}
