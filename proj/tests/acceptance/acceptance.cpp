// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli_runner.hpp"
#include "pools.hpp"
#include "proper/eval.hpp"
#include "proper/reranker.hpp"
#include "proper/text.hpp"
#include "wire_samples.hpp"

using namespace proper;
using namespace proper::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = PROPER_TEST_TMP;
const fs::path kFixtures = PROPER_FIXTURES_DIR;
const std::string kConfig = (kFixtures / "replay" / "config.json").string();
const std::string kSamples = (kFixtures / "replay" / "samples.jsonl").string();

// Collects the first failure of a criterion; later checks are still counted.
struct Verdict {
  std::string detail;
  std::size_t checks = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok && detail.empty()) detail = what;
  }
  bool ok() const { return detail.empty(); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path fresh(const std::string& name) {
  const auto p = kTmp / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(text::read_file(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string show(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct RandomCase {
  ActivationPool pool;
  RerankConfig cfg;
};

RandomCase random_case(std::mt19937_64& rng, bool zero_lambdas) {
  std::uniform_int_distribution<std::size_t> n_dist(1, 10);
  std::uniform_int_distribution<std::size_t> anchor_dist(0, 3);
  std::uniform_int_distribution<int> k_dist(1, 4);
  std::uniform_real_distribution<double> lambda(0.0, 4.0);
  RandomPoolSpec spec;
  spec.candidates = n_dist(rng);
  spec.anchors = anchor_dist(rng);
  spec.dimension = 8;
  spec.min_confidence = -2.0;
  RandomCase c{random_pool(rng, spec), {}};
  c.cfg.k = k_dist(rng);
  c.cfg.lambda1 = zero_lambdas ? 0.0 : lambda(rng);
  c.cfg.lambda2 = zero_lambdas ? 0.0 : lambda(rng);
  c.cfg.alignment_sign = rng() % 2 ? AlignmentSign::PenaltyAsWritten : AlignmentSign::RewardAsDescribed;
  return c;
}

Verdict exact_matches_brute_force() {
  Verdict v;
  std::mt19937_64 rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = random_case(rng, false);
    const auto got = select_exact(c.pool, c.cfg);
    const auto ref = brute_force(c.pool, c.cfg);
    v.expect(std::abs(got.objective - ref.best) <= 1e-9,
             "trial " + std::to_string(trial) + ": objective " + show(got.objective) + " vs " + show(ref.best));
    v.expect(std::find(ref.argmax.begin(), ref.argmax.end(), got.selected) != ref.argmax.end(),
             "trial " + std::to_string(trial) + ": selection is not a maximizer");
  }
  const double elapsed = seconds_since(t0);
  v.expect(elapsed < 10.0, "took " + show(elapsed) + " s");
  return v;
}

Verdict greedy_never_beats_exact() {
  Verdict v;
  std::mt19937_64 rng(2002);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = random_case(rng, false);
    const double exact = select_exact(c.pool, c.cfg).objective;
    const double greedy = select_greedy(c.pool, c.cfg).objective;
    v.expect(greedy <= exact + 1e-9, "trial " + std::to_string(trial) + ": greedy " + show(greedy) + " > exact " +
                                         show(exact));
  }
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_case(rng, true);
    const auto exact = select_exact(c.pool, c.cfg);
    const auto greedy = select_greedy(c.pool, c.cfg);
    v.expect(std::abs(greedy.objective - exact.objective) <= 1e-9,
             "zero-lambda trial " + std::to_string(trial) + ": greedy differs from exact");
  }
  return v;
}

Verdict four_point_fixture() {
  Verdict v;
  const auto pool = four_point_pool();
  RerankConfig cfg;
  cfg.k = 2;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 1.0;
  const auto want = sorted_ids(pool, {"d1", "d3"});
  for (const auto& r : {select_exact(pool, cfg), select_greedy(pool, cfg)}) {
    const auto name = std::string(to_string(r.solver));
    v.expect(r.selected == want, name + " picked another pair");
    v.expect(std::abs(r.objective - (-0.6)) <= 1e-9, name + " objective " + show(r.objective));
  }
  return v;
}

Verdict sweep_presets() {
  Verdict v;
  const auto out = fresh("sweep");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_cli(PROPER_CLI,
                         {"eval", "sweep", "--config", kConfig, "--input", kSamples, "--presets", "paper", "--out",
                          (out / "report").string()},
                         out);
  const double elapsed = seconds_since(t0);
  v.expect(r.exit_code == 0, "exit code " + std::to_string(r.exit_code) + ": " + r.err);
  if (!v.ok()) return v;
  const auto j = json::parse(text::read_file(out / "report" / "sweep.json"));
  const auto rep = sweep_report_from_json(j);
  std::vector<std::string> labels;
  for (const auto& p : rep.presets) labels.push_back(p.label());
  v.expect(labels == std::vector<std::string>{"(8.0,1.0)", "(2.0,0.5)", "(0.0,0.2)"}, "unexpected preset labels");
  for (const auto& l : labels) v.expect(r.out.find(l) != std::string::npos, "table lacks " + l);
  v.expect(rep.grid.size() == 3 && rep.datasets.size() == 3, "grid is not 3 x 3");
  v.expect(to_json(rep) == j, "grid does not round-trip");
  v.expect(sweep_report_from_json(to_json(rep)) == rep, "report does not round-trip");
  v.expect(elapsed < 5.0, "took " + show(elapsed) + " s");
  return v;
}

Verdict wire_format_strictness() {
  Verdict v;
  const auto good = well_formed_samples(20240611, 50);
  std::size_t per_kind[3] = {0, 0, 0};
  for (const auto& s : good) {
    ++per_kind[static_cast<int>(s.kind)];
    try {
      parse_wire(s.kind, s.text);
    } catch (const Error& e) {
      v.expect(false, s.label + " rejected: " + e.what());
    }
  }
  v.expect(per_kind[0] == 50 && per_kind[1] == 50 && per_kind[2] == 50, "sample counts are not 50/50/50");
  const auto bad = mutant_samples(99);
  v.expect(bad.size() == 30, "expected 30 mutants");
  for (const auto& m : bad) {
    try {
      parse_wire(m.kind, m.text);
      v.expect(false, m.label + " accepted");
    } catch (const Error& e) {
      v.expect(e.code() == *m.expected, m.label + ": got " + std::string(to_string(e.code())) + ", want " +
                                            std::string(to_string(*m.expected)));
      v.expect(e.category() == ErrorCategory::Parse, m.label + " is not a parse error");
    }
  }
  return v;
}

Verdict statistics() {
  Verdict v;
  auto rec = [](int a, int b) {
    EvalRecord r;
    r.score_a = a;
    r.score_b = b;
    return r;
  };
  const auto agg = aggregate({rec(3, 3), rec(4, 2), rec(5, 5)});
  v.expect(std::abs(agg.mu_a - 4.0) < 1e-12, "muScore A " + show(agg.mu_a));
  v.expect(std::abs(agg.mu_b - 10.0 / 3.0) < 1e-12, "muScore B " + show(agg.mu_b));
  v.expect(std::abs(agg.win_a - 200.0 / 3.0) < 1e-9, "Win% A " + show(agg.win_a));
  v.expect(std::abs(agg.win_b - 100.0 / 3.0) < 1e-9, "Win% B " + show(agg.win_b));
  const std::vector<std::tuple<std::size_t, std::size_t, double>> cases = {
      {10, 0, 0.001953125}, {7, 3, 0.34375}, {1, 0, 1.0}, {15, 5, 0.04138946533203125}, {60, 40, 0.05688793364098079}};
  for (const auto& [a, b, p] : cases) {
    const double got = sign_test(a, b);
    v.expect(std::abs(got - p) <= 1e-12 * std::max(1.0, p),
             "sign test " + std::to_string(a) + "/" + std::to_string(b) + " = " + show(got));
  }
  return v;
}

Verdict dataset_determinism() {
  Verdict v;
  const auto out = fresh("dataset");
  const std::string dump = (kFixtures / "codecontests").string();
  for (const auto* dir : {"a", "b"}) {
    const auto r = run_cli(PROPER_CLI,
                           {"dataset", "build", "--dataset", "codecontests", "--dump", dump, "--seed", "13", "--out",
                            (out / dir).string(), "--splits-only"},
                           out);
    v.expect(r.exit_code == 0, "exit code " + std::to_string(r.exit_code) + ": " + r.err);
  }
  if (!v.ok()) return v;
  v.expect(snapshot(out / "a") == snapshot(out / "b"), "outputs differ between runs");

  const auto stats = json::parse(text::read_file(out / "a" / "ingest_stats.json"));
  for (const auto& [difficulty, counts] : stats["per_difficulty"].items()) {
    v.expect(counts["warm"].get<int>() <= 15, "difficulty " + difficulty + " has more than 15 warm problems");
  }
  for (const auto& line : lines_of(out / "a" / "problems.jsonl")) {
    const auto j = json::parse(line);
    v.expect(j["solutions"].get<int>() <= 50, j["id"].get<std::string>() + " keeps more than 50 solutions");
  }
  const auto warm = lines_of(out / "a" / "splits" / "warm.txt").size();
  const auto train = lines_of(out / "a" / "splits" / "train.txt").size();
  const auto test = lines_of(out / "a" / "splits" / "test.txt").size();
  v.expect(warm > 0, "no warm problems");
  v.expect(train == warm * 7 / 10 && train + test == warm,
           "split sizes " + std::to_string(train) + "/" + std::to_string(test) + " of " + std::to_string(warm));
  return v;
}

Verdict pipeline_reproducibility() {
  Verdict v;
  const auto out = fresh("pipeline");
  auto run = [&](const std::string& dir, std::vector<std::string> extra, std::vector<std::string> env) {
    std::vector<std::string> args = {"pipeline", "run", "--config", kConfig, "--input", kSamples, "--out",
                                     (out / dir).string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(PROPER_CLI, args, out / ("log-" + dir), env);
    v.expect(r.exit_code == 0, dir + " exit code " + std::to_string(r.exit_code) + ": " + r.err);
  };

  const auto moved = out / "relocated-cache";
  fs::copy(kFixtures / "replay" / "cache", moved, fs::copy_options::recursive);
  run("first", {}, {});
  run("second", {}, {});
  run("relocated", {}, {"PROPER_CACHE_DIR=" + moved.string()});
  run("k0", {"--k", "0"}, {"PROPER_CACHE_DIR=" + moved.string()});
  run("no_rga", {"--variant", "no_rga"}, {});
  if (!v.ok()) return v;

  const auto first = snapshot(out / "first");
  v.expect(first.size() == 10, "expected 10 traces");
  v.expect(first == snapshot(out / "second"), "traces differ between runs");
  v.expect(first == snapshot(out / "relocated"), "traces differ after relocating the cache");

  for (const auto& [name, body] : snapshot(out / "k0")) {
    const auto t = json::parse(body);
    bool saw_rga = false;
    for (const auto& stage : t["stages"]) {
      if (stage["stage"] != "rga") continue;
      saw_rga = true;
      const auto entry = json::parse(text::read_file(moved / (stage["request_id"].get<std::string>() + ".json")));
      const auto prompt = entry["request"]["messages"].back()["content"].get<std::string>();
      v.expect(prompt.find("[implicit]") == std::string::npos, name + ": RGA prompt lists implicit dimensions");
    }
    v.expect(saw_rga, name + " has no RGA stage");
  }
  for (const auto& [name, body] : snapshot(out / "no_rga")) {
    const auto t = json::parse(body);
    const auto r0 = t["r0"].get<std::string>();
    v.expect(!r0.empty() && t["final_response"].get<std::string>().rfind(r0, 0) == 0,
             name + ": output does not start with r0");
  }
  return v;
}

Verdict empty_anchor_alignment() {
  Verdict v;
  std::mt19937_64 rng(9009);
  std::uniform_int_distribution<std::size_t> n_dist(1, 10);
  std::uniform_int_distribution<int> k_dist(1, 4);
  std::uniform_real_distribution<double> lambda(0.0, 8.0);
  for (int trial = 0; trial < 200; ++trial) {
    RandomPoolSpec spec;
    spec.candidates = n_dist(rng);
    spec.anchors = 0;
    const auto pool = random_pool(rng, spec);
    RerankConfig cfg;
    cfg.k = k_dist(rng);
    cfg.lambda1 = lambda(rng);
    cfg.lambda2 = lambda(rng);
    cfg.alignment_sign = trial % 2 ? AlignmentSign::PenaltyAsWritten : AlignmentSign::RewardAsDescribed;
    for (const auto& r : {select_exact(pool, cfg), select_greedy(pool, cfg)}) {
      v.expect(r.alignment_term == 0.0, "trial " + std::to_string(trial) + ": alignment " + show(r.alignment_term));
      v.expect(std::isfinite(r.objective), "trial " + std::to_string(trial) + ": objective not finite");
    }
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"exact selection matches brute force on 1000 random pools within 10 s", exact_matches_brute_force},
      {"greedy never beats exact and equals it with zero lambdas", greedy_never_beats_exact},
      {"four-point fixture selects {d1,d3} at -0.6 with both solvers", four_point_fixture},
      {"sweep over the reference presets labels, round-trips and finishes within 5 s", sweep_presets},
      {"50/50/50 well-formed outputs parse and 30 corrupted ones fail with their codes", wire_format_strictness},
      {"muScore, Win% and sign-test p-values match independent values", statistics},
      {"dataset build is deterministic with capped warm sets, solutions and 70/30 splits", dataset_determinism},
      {"pipeline traces are reproducible, relocatable and honor k=0 and no_rga", pipeline_reproducibility},
      {"alignment term is zero when there are no unmet explicit anchors", empty_anchor_alignment},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (v.ok() ? "PASS" : "FAIL") << " [" << i + 1 << "] " << name << " (" << v.checks << " checks)";
    if (!v.ok()) {
      std::cout << ": " << v.detail;
      ++failures;
    }
    std::cout << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
