#include <catch_amalgamated.hpp>

#include <random>

#include "pools.hpp"
#include "proper/reranker.hpp"

using namespace proper;
using namespace proper::testing;
using Catch::Approx;

TEST_CASE("four point fixture: every pair scores as computed by hand") {
  const auto pool = four_point_pool();
  RerankConfig cfg;
  cfg.k = 2;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 1.0;
  // quality minus pairwise cosine
  const std::vector<std::tuple<std::string, std::string, double>> expected = {
      {"d1", "d2", -1.3}, {"d1", "d3", -0.6}, {"d1", "d4", -1.6},
      {"d2", "d3", -0.7}, {"d2", "d4", -1.7}, {"d3", "d4", -2.2}};
  for (const auto& [a, b, v] : expected) {
    CHECK(objective({id_of(pool, a), id_of(pool, b)}, pool, cfg).objective == Approx(v).margin(1e-12));
  }

  const auto exact = select_exact(pool, cfg);
  const auto greedy = select_greedy(pool, cfg);
  CHECK(exact.selected == sorted_ids(pool, {"d1", "d3"}));
  CHECK(greedy.selected == exact.selected);
  CHECK(exact.objective == Approx(-0.6).margin(1e-12));
  CHECK(exact.diversity_term == Approx(0.0).margin(1e-12));
  CHECK(exact.solver == Solver::Exact);
  CHECK(greedy.solver == Solver::Greedy);
}

TEST_CASE("objective terms and sign conventions") {
  CHECK(combine_terms(-1.0, 0.5, 0.25, {.k = 1, .lambda1 = 2.0, .lambda2 = 4.0}) == Approx(-3.0));
  RerankConfig reward;
  reward.lambda1 = 2.0;
  reward.lambda2 = 4.0;
  reward.alignment_sign = AlignmentSign::RewardAsDescribed;
  CHECK(combine_terms(-1.0, 0.5, 0.25, reward) == Approx(-1.0));
  CHECK(alignment_sign_from_string("reward") == AlignmentSign::RewardAsDescribed);
  CHECK(pool_mode_from_string("joint") == PoolMode::Joint);
  CHECK_THROWS_AS(pool_mode_from_string("strict"), Error);
}

TEST_CASE("empty anchor set contributes no alignment") {
  auto pool = four_point_pool();
  RerankConfig cfg;
  cfg.k = 3;
  cfg.lambda1 = 5.0;
  const auto r = select_exact(pool, cfg);
  CHECK(r.alignment_term == 0.0);
}

TEST_CASE("alignment uses the closest anchor") {
  auto pool = four_point_pool();
  auto anchor_a = explicit_dim("anchor-a");
  auto anchor_b = explicit_dim("anchor-b");
  pool.embeddings.emplace(anchor_a.id(), EmbeddingVector::normalize({1.0, 0.0}));
  pool.embeddings.emplace(anchor_b.id(), EmbeddingVector::normalize({0.0, 1.0}));
  pool.unmet_explicit = {anchor_a, anchor_b};
  RerankConfig cfg;
  cfg.k = 1;
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 0.0;
  // d4 = (0.6, 0.8): closest anchor gives 0.8
  CHECK(objective({id_of(pool, "d4")}, pool, cfg).alignment_term == Approx(0.8));
  CHECK(objective({id_of(pool, "d3")}, pool, cfg).alignment_term == Approx(1.0));
}

TEST_CASE("pool modes") {
  auto pool = four_point_pool();
  auto anchor = explicit_dim("anchor");
  pool.embeddings.emplace(anchor.id(), EmbeddingVector::normalize({0.0, 1.0}));
  pool.unmet_explicit = {anchor};
  RerankConfig cfg;
  CHECK(candidate_pool(pool, cfg).size() == 4);
  cfg.pool_mode = PoolMode::Joint;
  CHECK(candidate_pool(pool, cfg).size() == 5);
  CHECK_THROWS_AS(objective({anchor.id()}, pool, RerankConfig{}), Error);
}

TEST_CASE("budget larger than the pool selects everything") {
  const auto pool = four_point_pool();
  RerankConfig cfg;
  cfg.k = 10;
  CHECK(select_exact(pool, cfg).selected.size() == 4);
  CHECK(select_greedy(pool, cfg).selected.size() == 4);
  cfg.k = 0;
  CHECK(select_exact(pool, cfg).selected.empty());
  CHECK(select_greedy(pool, cfg).selected.empty());
}

TEST_CASE("config validation") {
  RerankConfig cfg;
  cfg.k = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lambda1 = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lambda2 = INFINITY;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("exact selection refuses oversized pools; select falls back to greedy") {
  std::mt19937_64 rng(3);
  const auto pool = random_pool(rng, {.candidates = 12, .anchors = 1});
  RerankConfig cfg;
  cfg.exact_limit = 10;
  try {
    select_exact(pool, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Capacity);
  }
  CHECK(select(pool, cfg).solver == Solver::Greedy);
  cfg.exact_limit = 12;
  CHECK(select(pool, cfg).solver == Solver::Exact);
}

TEST_CASE("exact ties prefer quality, then the smallest id list") {
  ActivationPool pool;
  std::vector<Dimension> dims;
  for (const char* n : {"p", "q", "r"}) {
    auto d = implicit_dim(n, -0.5);
    pool.embeddings.emplace(d.id(), EmbeddingVector::normalize({1.0, 0.0}));
    pool.implicit_candidates.push_back(d);
  }
  RerankConfig cfg;
  cfg.k = 1;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  const auto r = select_exact(pool, cfg);
  std::vector<std::string> ids;
  for (const auto& d : pool.implicit_candidates) ids.push_back(d.id());
  std::sort(ids.begin(), ids.end());
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected[0] == ids[0]);
  CHECK(select_greedy(pool, cfg).selected == r.selected);
}

TEST_CASE("exact matches brute force on random pools in both sign and pool modes") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> n_dist(0, 9), k_dist(0, 4), a_dist(0, 3);
  std::uniform_real_distribution<double> lam(0.0, 4.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pool = random_pool(rng, {.candidates = static_cast<std::size_t>(n_dist(rng)),
                                        .anchors = static_cast<std::size_t>(a_dist(rng))});
    RerankConfig cfg;
    cfg.k = k_dist(rng);
    cfg.lambda1 = lam(rng);
    cfg.lambda2 = lam(rng);
    cfg.alignment_sign = trial % 2 ? AlignmentSign::RewardAsDescribed : AlignmentSign::PenaltyAsWritten;
    cfg.pool_mode = trial % 3 == 0 ? PoolMode::Joint : PoolMode::ImplicitOnly;
    const auto oracle = brute_force(pool, cfg);
    const auto exact = select_exact(pool, cfg);
    const auto greedy = select_greedy(pool, cfg);
    CHECK(exact.objective == Approx(oracle.best).margin(1e-9));
    CHECK(std::find(oracle.argmax.begin(), oracle.argmax.end(), exact.selected) != oracle.argmax.end());
    CHECK(greedy.objective <= exact.objective + 1e-9);
  }
}

TEST_CASE("presets") {
  const auto& p = reference_presets();
  REQUIRE(p.size() == 3);
  CHECK(p[0].label() == "(8.0,1.0)");
  CHECK(p[1].label() == "(2.0,0.5)");
  CHECK(p[2].label() == "(0.0,0.2)");
  CHECK(preset_by_name("light").lambda2 == 0.2);
  CHECK_THROWS_AS(preset_by_name("extreme"), Error);
}

TEST_CASE("selection JSON round trip") {
  const auto pool = four_point_pool();
  RerankConfig cfg;
  cfg.k = 2;
  const auto r = select_exact(pool, cfg);
  const auto back = selection_from_json(to_json(r));
  CHECK(back.selected == r.selected);
  CHECK(back.objective == r.objective);
  CHECK(back.config.k == 2);
  CHECK(back.solver == Solver::Exact);
}
