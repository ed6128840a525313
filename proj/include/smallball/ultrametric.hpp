#pragma once
// Projective center hierarchy over an ultrametric space and the attached tree
// process Z(t) = sum_n eps(n) g_{node_n(t)} with one independent standard
// coefficient per (level, center) node: exact covariance, a certified
// small-ball upper bound from disjoint sibling differences, the chaining
// lower bound on the canonical partition chain, Monte Carlo sampling, exact
// tree-metric fixtures, and JSON export.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "smallball/chaining.hpp"
#include "smallball/cover.hpp"
#include "smallball/rng.hpp"

namespace smallball {

struct UltrametricTree {
  // levels[n] lists the level-n center point indices (covers at radius
  // eps(n)); parent[n][j] is the position in levels[n-1] of center j's nearest
  // coarser center (parent[0] is empty); theta[n][p] is the position in
  // levels[n] of point p's nearest center (lowest position on ties).
  std::vector<std::vector<std::size_t>> levels;
  std::vector<std::vector<std::size_t>> parent;
  std::vector<std::vector<std::size_t>> theta;
  double diameter = 0.0;
  // Smallest level whose cover count did not grow; levels.size() when every
  // level keeps splitting. Bounds are vacuous at non-splitting levels.
  std::size_t first_non_splitting_level = 0;
  // True when each deepest cell has zero diameter, i.e. the requested depth
  // fully resolves the space.
  bool resolved = false;

  std::size_t depth() const { return levels.empty() ? 0 : levels.size() - 1; }
  std::size_t n_points() const { return theta.empty() ? 0 : theta[0].size(); }
  std::size_t n_leaves() const { return levels.empty() ? 0 : levels.back().size(); }
  double eps(std::size_t n) const;  // 2^-n * diameter

  // Position in levels[n] of the ancestor of leaf j (a position in the
  // deepest level).
  std::size_t ancestor(std::size_t leaf, std::size_t n) const;
  // Deepest level where the center chains of two leaves agree (depth for
  // equal leaves).
  std::size_t split_level(std::size_t leaf_a, std::size_t leaf_b) const;
  // Tree metric between space points: eps of the deepest level where their
  // center chains agree, and 0 when the chains agree everywhere (which on a
  // resolved space happens only for coincident points).
  double delta(std::size_t point_a, std::size_t point_b) const;
};

// Builds the hierarchy from greedy covers at radii 2^-n * diameter for
// n = 0..depth and verifies the projective invariants: chain compatibility of
// the nearest-center maps, d(t, center_n(t)) <= eps(n), the strong triangle
// inequality for the tree metric (exhaustive over triples up to 2^8 points,
// randomized beyond), and the embedding sandwich delta/2 <= d <= delta on
// separated pairs plus d <= eps(depth) on unseparated ones (exhaustive up to
// 2^10 points, randomized beyond). The guarantees need an input whose metric
// is ultrametric; violations (e.g. from a generic metric) throw
// std::logic_error. Requires 1 <= depth <= 40 and at most 2^12 points.
UltrametricTree build_ultrametric_tree(const FiniteMetricSpace& space, std::size_t depth);

// E Z(a)Z(b) for leaves a, b: sum of eps(n)^2 over the shared chain prefix
// n = 0..split_level(a,b). E Z(a)^2 is the full sum to the tree depth.
double z_covariance(const UltrametricTree& tree, std::size_t leaf_a, std::size_t leaf_b);

// Intrinsic distance sqrt(E (Z(a) - Z(b))^2), zero for equal leaves.
double z_distance(const UltrametricTree& tree, std::size_t leaf_a, std::size_t leaf_b);

struct ZRatioReport {
  // Worst within-level spread of z_distance / eps(split_level) over leaf
  // pairs: the ratio depends on the split level only, never on the pair.
  double max_spread = 0.0;
  // The ratio at each split level (quiet NaN where no pair splits there). At
  // level n it equals sqrt(2/3 * (1 - 4^(n - depth))), approaching sqrt(2/3)
  // for deep trees.
  std::vector<double> ratio_by_level;
};
ZRatioReport z_ratio_report(const UltrametricTree& tree);

struct ZUpperBound {
  std::size_t level = 0;    // n with eps(n+1) < epsilon <= eps(n), capped at depth
  std::size_t n_pairs = 0;  // disjoint same-parent difference pairs at that level
  double pair_sigma = 0.0;  // exact standard deviation of each difference
  double log_bound = 0.0;   // n_pairs * log P{|g| <= eps(level)/pair_sigma}
};

// Certified upper bound: log P{sup_{a,b} |Z(a)-Z(b)| <= epsilon} <= log_bound.
// Picks the level bracketing epsilon, pairs siblings under each parent
// (floor(children/2) pairs), verifies from z_covariance that the pair
// differences have exactly diagonal covariance with common variance
// pair_sigma^2 = 2 sum_{m >= level} eps(m)^2, and multiplies the exact
// per-pair probabilities. Vacuous (0) when no parent splits at the level.
// Throws std::domain_error unless 0 < epsilon <= diameter.
ZUpperBound z_small_ball_upper(const UltrametricTree& tree, double epsilon);

// Partition chain of the same-ancestor leaf classes per level: level-n cells
// sit inside tree-metric balls of radius eps(n), so the chain has diameter D
// and satisfies the nested-partition contract for the process metric as well
// (z_distance <= delta). Cell ids are renumbered by smallest member.
PartitionChain canonical_partition_chain(const UltrametricTree& tree);

// Chaining lower bound for Z at radius epsilon: delegates to
// mm_lower_exponent on the canonical chain with sigma = 2 D / sqrt(3).
ChainLowerBound z_small_ball_lower(const UltrametricTree& tree, const MajorizingMeasure& mu,
                                   const WeightSequence& v, double epsilon);

struct ZMcResult {
  double epsilon = 0.0;
  double p_hat = 0.0;
  double std_err = 0.0;
  std::size_t n_paths = 0;
};

// MC estimate of P{max_a Z(a) - min_a Z(a) <= epsilon} over leaves (the
// range form of the pairwise sup). One substream per path.
ZMcResult z_range_mc(const UltrametricTree& tree, double epsilon, std::size_t n_paths,
                     SeedSpec seed);
// MC estimate of P{max_a |Z(a)| <= epsilon}.
ZMcResult z_sup_mc(const UltrametricTree& tree, double epsilon, std::size_t n_paths,
                   SeedSpec seed);

// Exact tree metrics for fixtures. Balanced b-ary: leaves are the b^depth
// base-b strings, d = 2^-(common prefix). Random dendrogram: successive
// merges of uniformly chosen clusters at sorted Uniform[1/8, 1] heights.
FiniteMetricSpace balanced_tree_space(std::size_t branching, std::size_t depth);
FiniteMetricSpace random_dendrogram_space(std::size_t n_points, SeedSpec seed);

// JSON document with diameter, eps values, levels, parent arrays, and the
// resolution report.
std::string ultra_tree_json(const UltrametricTree& tree);

}  // namespace smallball
