#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "smallball/chaining.hpp"
#include "smallball/ultrametric.hpp"

using namespace smallball;

namespace {

// Common base-3 prefix length of two depth-5 leaf labels.
std::size_t ternary_prefix(std::size_t i, std::size_t j) {
  std::size_t scale = 81;
  std::size_t prefix = 0;
  while (scale > 0) {
    if (i / scale != j / scale) break;
    i %= scale;
    j %= scale;
    ++prefix;
    scale /= 3;
  }
  return prefix;
}

// The non-ultrametric quadruple: b and c share a tight cover center yet sit
// farther apart than the cover radius.
FiniteMetricSpace skewed_quad() {
  FiniteMetricSpace s;
  s.n = 4;
  s.dist = [](std::size_t i, std::size_t j) {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    if (j == 3) return 1.0;                  // the far point
    if (i == 0) return 0.24;                 // a-b, a-c
    return 0.4;                              // b-c
  };
  return s;
}

}  // namespace

TEST_CASE("balanced ternary tree: structure and metric recovery") {
  const FiniteMetricSpace space = balanced_tree_space(3, 5);
  REQUIRE(space.n == 243);
  space.validate();
  const UltrametricTree tree = build_ultrametric_tree(space, 5);

  CHECK(tree.depth() == 5);
  CHECK(tree.diameter == 1.0);
  for (std::size_t n = 0; n <= 5; ++n) {
    std::size_t want = 1;
    for (std::size_t k = 0; k < n; ++k) want *= 3;
    CHECK(tree.levels[n].size() == want);
  }
  CHECK(tree.first_non_splitting_level == 6);
  CHECK(tree.resolved);

  // The tree metric reproduces the prefix metric exactly.
  for (std::size_t i = 0; i < 243; ++i)
    for (std::size_t j = i; j < 243; ++j) {
      const double want = i == j ? 0.0 : std::ldexp(1.0, -static_cast<int>(ternary_prefix(i, j)));
      CHECK(tree.delta(i, j) == want);
    }

  // Deterministic rebuild.
  const UltrametricTree again = build_ultrametric_tree(space, 5);
  CHECK(again.levels == tree.levels);
  CHECK(again.theta == tree.theta);
  CHECK(again.parent == tree.parent);
}

TEST_CASE("tiny trees") {
  FiniteMetricSpace one;
  one.n = 1;
  one.dist = [](std::size_t, std::size_t) { return 0.0; };
  const UltrametricTree t1 = build_ultrametric_tree(one, 3);
  CHECK(t1.resolved);
  CHECK(t1.n_leaves() == 1);
  for (std::size_t n = 0; n <= 3; ++n) CHECK(t1.levels[n].size() == 1);
  CHECK(z_covariance(t1, 0, 0) == doctest::Approx(0.0));

  FiniteMetricSpace two;
  two.n = 2;
  two.dist = [](std::size_t i, std::size_t j) { return i == j ? 0.0 : 1.0; };
  const UltrametricTree t2 = build_ultrametric_tree(two, 3);
  CHECK(t2.levels[0].size() == 1);
  CHECK(t2.levels[1].size() == 2);
  CHECK(t2.split_level(0, 1) == 0);
  CHECK(t2.delta(0, 1) == 1.0);   // they share only the root cover
  CHECK(t2.delta(0, 0) == 0.0);
  CHECK(z_covariance(t2, 0, 1) == doctest::Approx(1.0).epsilon(1e-15));  // root term only

  CHECK_THROWS_AS(build_ultrametric_tree(two, 0), std::domain_error);
  CHECK_THROWS_AS(build_ultrametric_tree(two, 41), std::domain_error);
  FiniteMetricSpace empty;
  CHECK_THROWS_AS(build_ultrametric_tree(empty, 3), std::domain_error);
  FiniteMetricSpace huge;
  huge.n = 4097;
  huge.dist = [](std::size_t, std::size_t) { return 0.0; };
  CHECK_THROWS_AS(build_ultrametric_tree(huge, 3), std::domain_error);
}

TEST_CASE("non-ultrametric input is rejected with a construction error") {
  const FiniteMetricSpace bad = skewed_quad();
  bad.validate();  // it is a genuine metric, just not ultrametric
  CHECK_THROWS_AS(build_ultrametric_tree(bad, 2), std::logic_error);
}

TEST_CASE("process covariance and intrinsic distance") {
  const UltrametricTree tree = build_ultrametric_tree(balanced_tree_space(3, 5), 5);

  CHECK(z_covariance(tree, 7, 7) == doctest::Approx(1.3330078125).epsilon(1e-15));
  CHECK(z_covariance(tree, 0, 81) == doctest::Approx(1.0).epsilon(1e-15));  // split at the root
  CHECK(z_distance(tree, 4, 4) == 0.0);
  CHECK_THROWS_AS(z_covariance(tree, 0, 243), std::domain_error);
  CHECK_THROWS_AS(z_distance(tree, 243, 0), std::domain_error);

  // Finite-depth ratio family sqrt(2/3 (1 - 4^(nu-5))), constant per level.
  const ZRatioReport rep = z_ratio_report(tree);
  CHECK(rep.max_spread <= 1e-12);
  const double want[5] = {0.8160978035750373, 0.8149003006503311, 0.8100925873009825,
                          0.7905694150420949, 0.7071067811865476};
  for (std::size_t v = 0; v < 5; ++v) {
    CHECK(rep.ratio_by_level[v] == doctest::Approx(want[v]).epsilon(1e-12));
    CHECK(rep.ratio_by_level[v] ==
          doctest::Approx(std::sqrt((2.0 / 3.0) *
                                    (1.0 - std::ldexp(1.0, 2 * (static_cast<int>(v) - 5)))))
              .epsilon(1e-12));
  }
  CHECK(std::isnan(rep.ratio_by_level[5]));  // no pair splits at the leaf level
  // Recorded constant comparison: the computed ratios sit at sqrt(2/3), far
  // from the sqrt(3/2) variant.
  CHECK(std::abs(rep.ratio_by_level[0] - std::sqrt(2.0 / 3.0)) < 1e-3);
  CHECK(std::abs(rep.ratio_by_level[0] - std::sqrt(1.5)) > 0.4);
}

TEST_CASE("sibling-difference small-ball upper bound") {
  const UltrametricTree tree = build_ultrametric_tree(balanced_tree_space(3, 5), 5);

  const ZUpperBound at2 = z_small_ball_upper(tree, 0.25);
  CHECK(at2.level == 2);
  CHECK(at2.n_pairs == 3);
  CHECK(at2.pair_sigma == doctest::Approx(0.4074501503).epsilon(1e-10));
  CHECK(at2.log_bound == doctest::Approx(-2.326316).epsilon(1e-6));
  {
    // Direct recomputation from the definition.
    const double var = 2.0 * (0.0625 + 0.015625 + 0.00390625 + 0.0009765625);
    const double want = 3.0 * std::log(std::erf(0.25 / std::sqrt(var) / std::sqrt(2.0)));
    CHECK(at2.log_bound == doctest::Approx(want).epsilon(1e-14));
  }

  const ZUpperBound at3 = z_small_ball_upper(tree, 0.125);
  CHECK(at3.level == 3);
  CHECK(at3.n_pairs == 9);
  CHECK(at3.pair_sigma == doctest::Approx(0.2025231468).epsilon(1e-10));
  CHECK(at3.log_bound == doctest::Approx(-6.932081).epsilon(1e-6));

  const ZUpperBound between = z_small_ball_upper(tree, 0.26);
  CHECK(between.level == 1);
  CHECK(between.n_pairs == 1);
  CHECK(between.pair_sigma == doctest::Approx(0.8160978036).epsilon(1e-10));

  const ZUpperBound vac = z_small_ball_upper(tree, 1.0);
  CHECK(vac.level == 0);
  CHECK(vac.n_pairs == 0);
  CHECK(vac.log_bound == 0.0);

  CHECK_THROWS_AS(z_small_ball_upper(tree, 1.5), std::domain_error);
  CHECK_THROWS_AS(z_small_ball_upper(tree, 0.0), std::domain_error);
  CHECK_THROWS_AS(z_small_ball_upper(tree, -0.1), std::domain_error);
}

TEST_CASE("Monte Carlo range probability respects the upper bound") {
  const UltrametricTree tree = build_ultrametric_tree(balanced_tree_space(3, 5), 5);
  const SeedSpec seed{991, 0};

  for (double eps : {0.25, 0.125}) {
    const ZUpperBound ub = z_small_ball_upper(tree, eps);
    const ZMcResult mc = z_range_mc(tree, eps, 20000, seed);
    CHECK(mc.p_hat <= std::exp(ub.log_bound) + 3.0 * mc.std_err + 1e-9);
  }
  // Wide radius: the range event is nearly certain.
  CHECK(z_range_mc(tree, 20.0, 2000, seed).p_hat > 0.99);
  // Determinism.
  CHECK(z_range_mc(tree, 0.5, 5000, seed).p_hat ==
        z_range_mc(tree, 0.5, 5000, seed).p_hat);

  CHECK_THROWS_AS(z_range_mc(tree, 0.0, 100, seed), std::domain_error);
  CHECK_THROWS_AS(z_sup_mc(tree, 0.5, 0, seed), std::domain_error);
  CHECK_THROWS_AS(z_sup_mc(tree, 0.5, std::size_t{1} << 40, seed), std::length_error);
}

TEST_CASE("canonical chain and the delegated lower bound") {
  const FiniteMetricSpace space = balanced_tree_space(3, 5);
  const UltrametricTree tree = build_ultrametric_tree(space, 5);
  const PartitionChain chain = canonical_partition_chain(tree);

  CHECK(chain.depth() == 5);
  CHECK(chain.n_points() == 243);
  for (std::size_t n = 0; n <= 5; ++n) {
    std::size_t want = 1;
    for (std::size_t k = 0; k < n; ++k) want *= 3;
    CHECK(chain.n_cells(n) == want);
  }
  // Valid nested partition both for the tree metric and the process metric.
  verify_partition_chain(chain, space);
  FiniteMetricSpace zspace;
  zspace.n = 243;
  zspace.dist = [&tree](std::size_t a, std::size_t b) { return z_distance(tree, a, b); };
  verify_partition_chain(chain, zspace);

  // Closed-form H by symmetry: every level-m cell has measure 3^-min(m,5).
  const MajorizingMeasure mu = uniform_measure(243);
  const WeightSequence v = square_weights();
  for (std::size_t n : {1u, 2u, 3u}) {
    double want = 0.0;
    for (int m = static_cast<int>(n) + 1; m <= 64; ++m) {
      const double cells = std::pow(3.0, std::min(m, 5));
      want += std::ldexp(1.0, -m) *
              std::sqrt(std::log(static_cast<double>(m) * static_cast<double>(m) * cells));
    }
    const TailFunctional h = h_function(chain, mu, v, n);
    CHECK(h.value == doctest::Approx(want).epsilon(1e-9));
  }

  // Level selection from an independently derived threshold table.
  const double sigma = 2.0 / std::sqrt(3.0);
  auto oracle_h = [&](std::size_t n) {
    double acc = 0.0;
    for (int m = static_cast<int>(n) + 1; m <= 200; ++m)
      acc += std::ldexp(1.0, -m) *
             std::sqrt(std::log(static_cast<double>(m) * static_cast<double>(m) *
                                std::pow(3.0, std::min(m, 5))));
    return acc;
  };
  for (double eps : {0.2, 0.3, 0.5}) {
    std::size_t expect = 1;
    while (oracle_h(expect) > eps * sigma) ++expect;
    const ChainLowerBound lb = z_small_ball_lower(tree, mu, v, eps);
    CHECK(lb.level == expect);
    std::size_t cells = 1;
    for (std::size_t k = 0; k < std::min<std::size_t>(expect, 5); ++k) cells *= 3;
    CHECK(lb.n_cells == cells);
    CHECK(lb.exponent ==
          doctest::Approx(static_cast<double>(cells) * std::log(1.0 / eps)).epsilon(1e-12));
  }
  // Nonincreasing exponent in epsilon.
  CHECK(z_small_ball_lower(tree, mu, v, 0.2).exponent >=
        z_small_ball_lower(tree, mu, v, 0.3).exponent);
  CHECK(z_small_ball_lower(tree, mu, v, 0.3).exponent >=
        z_small_ball_lower(tree, mu, v, 0.5).exponent);

  // MC consistency of the lower-bound direction, constants recorded.
  for (double eps : {0.3, 0.5}) {
    const ChainLowerBound lb = z_small_ball_lower(tree, mu, v, eps);
    const ZMcResult mc = z_sup_mc(tree, 2.0 * eps * sigma, 20000, {337, 0});
    CHECK(mc.p_hat + 3.0 * mc.std_err >= std::exp(-lb.exponent));
    MESSAGE("eps=", eps, " C_fit=-log p - (-exponent)=",
            -std::log(mc.p_hat) - lb.exponent);
  }
}

TEST_CASE("random dendrograms build valid trees") {
  for (std::uint64_t i = 1; i <= 10; ++i) {
    const std::size_t n = 16 + 24 * static_cast<std::size_t>(i);
    const FiniteMetricSpace space = random_dendrogram_space(n, {42, i});
    space.validate();
    const UltrametricTree tree = build_ultrametric_tree(space, 5);  // throws on violation
    CHECK(tree.resolved);  // merges happen above D/8 = eps(3)
    CHECK(tree.n_leaves() == n);
  }

  // Split levels agree with the closed-form ball level of the exact metric.
  const FiniteMetricSpace space = random_dendrogram_space(64, {7, 3});
  const UltrametricTree tree = build_ultrametric_tree(space, 5);
  for (std::size_t a = 0; a < 64; ++a)
    for (std::size_t b = a + 1; b < 64; ++b) {
      const double d = space.dist(a, b);
      std::size_t nu = 0;
      while (nu < 5 && tree.eps(nu + 1) >= d) ++nu;
      const double want = tree.eps(nu);
      CHECK(tree.delta(a, b) == doctest::Approx(want).epsilon(1e-12));
      CHECK(0.5 * tree.delta(a, b) <= d * (1.0 + 1e-12));
      CHECK(d <= tree.delta(a, b) * (1.0 + 1e-12));
    }

  CHECK_THROWS_AS(random_dendrogram_space(1, {1, 1}), std::domain_error);
  CHECK_THROWS_AS(random_dendrogram_space(4097, {1, 1}), std::domain_error);
  CHECK_THROWS_AS(balanced_tree_space(1, 3), std::domain_error);
  CHECK_THROWS_AS(balanced_tree_space(3, 9), std::domain_error);  // 3^9 > 2^12
}

TEST_CASE("tree serialization") {
  const UltrametricTree tree = build_ultrametric_tree(balanced_tree_space(2, 3), 3);
  const nlohmann::json j = nlohmann::json::parse(ultra_tree_json(tree));
  CHECK(j["diameter"].get<double>() == 1.0);
  CHECK(j["depth"].get<std::size_t>() == 3);
  CHECK(j["n_points"].get<std::size_t>() == 8);
  CHECK(j["resolved"].get<bool>());
  REQUIRE(j["eps"].size() == 4);
  CHECK(j["eps"][0].get<double>() == 1.0);
  CHECK(j["eps"][3].get<double>() == 0.125);
  REQUIRE(j["levels"].size() == 4);
  CHECK(j["levels"][3].size() == 8);
  REQUIRE(j["parent"].size() == 4);
  CHECK(j["parent"][1].size() == j["levels"][1].size());
  CHECK(j["parent"][0].empty());
}
