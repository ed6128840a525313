#pragma once
// Nested partition chains on finite metric spaces, majorizing measures, the
// level tail functional H(n), and the resulting small-deviation lower-bound
// exponent, together with the dyadic interval instantiation.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "smallball/cover.hpp"

namespace smallball {

// A nested sequence of partitions of a finite index set. Level 0 is the whole
// set; each later level refines the previous one, and every cell at level n
// has diameter at most 2^-n times the chain diameter. Cells are numbered in
// order of their smallest member, so the layout is deterministic.
//
// Levels past the stored depth are read as the deepest stored partition: a
// finite chain stabilizes once it stops refining, which is what the infinite
// tail sums below rely on.
struct PartitionChain {
  std::vector<std::vector<std::size_t>> cell_index;          // level -> point -> cell id
  std::vector<std::vector<std::vector<std::size_t>>> cells;  // level -> cell id -> points
  double diameter = 0.0;

  std::size_t depth() const { return cell_index.empty() ? 0 : cell_index.size() - 1; }
  std::size_t n_points() const { return cell_index.empty() ? 0 : cell_index.front().size(); }
  std::size_t n_cells(std::size_t level) const;
  // 2^-level times the chain diameter: the cell-diameter bound at this level.
  double level_scale(std::size_t level) const;
  // Cell id of a point, with levels beyond the stored depth clamped.
  std::size_t cell_of(std::size_t point, std::size_t level) const;
};

// Probability weights over the index points of a chain.
struct MajorizingMeasure {
  std::vector<double> weights;
};

MajorizingMeasure uniform_measure(std::size_t n_points);

// Throws std::invalid_argument unless the weights are nonnegative, match the
// point count, and sum to 1 within 1e-9.
void validate_measure(const MajorizingMeasure& mu, std::size_t n_points);

// Per-level weights v(m) entering the tail functional. The envelope
// log v(m) <= log_coef_a + log_coef_b * m (for every m >= 1) is what certifies
// the tail of the level sum past the explicit cutoff; it is spot-checked at
// use sites and must be supplied with the callback.
struct WeightSequence {
  std::function<double(std::size_t)> v;
  double log_coef_a = 0.0;
  double log_coef_b = 0.0;
};

// v(m) = m^2: summable reciprocals with a slowly growing logarithm.
WeightSequence square_weights();

// v(m) = 4^m / diameter^2, the reciprocal of the quadratic modulus evaluated
// at the level scale. Requires diameter > 0.
WeightSequence geometric_weights(double diameter);

// Certified bound on sum_{m > cutoff} 1/v(m), obtained from the ratio
// m^2 / v(m) being nonincreasing on [2, cutoff] (throws if it is not: the
// certificate only covers families at least as summable as 1/m^2).
double weight_tail_certificate(const WeightSequence& v, std::size_t cutoff);

// A value together with a certified bound on the truncated remainder; the
// certified upper value is value + tail_bound.
struct TailFunctional {
  double value = 0.0;
  double tail_bound = 0.0;
};

// H(n) = sup over points t of sum_{m > n} 2^-m D sqrt(log(v(m) / mu(cell of t
// at level m))), with cells past the stored depth frozen at the deepest
// partition. Terms up to depth_cutoff are explicit; beyond it the remainder is
// bounded through the envelope of v and the smallest deepest-cell measure, and
// must come out below 1e-6 of the result scale (else std::domain_error asking
// for a larger cutoff). Throws std::domain_error on zero-measure cells or if
// some used ratio v(m)/mu(cell) falls below 1.
TailFunctional h_function(const PartitionChain& chain, const MajorizingMeasure& mu,
                          const WeightSequence& v, std::size_t n, std::size_t depth_cutoff = 64);

// Smallest level n >= 1 with certified H(n) <= epsilon * sigma. Requires
// 0 < epsilon * sigma < H(0) (std::domain_error otherwise). If no stored level
// works, throws std::domain_error with a required-depth hint obtained by
// continuing the stabilized tail.
std::size_t n_of_epsilon(const PartitionChain& chain, const MajorizingMeasure& mu,
                         const WeightSequence& v, double epsilon, double sigma);

struct ChainLowerBound {
  std::size_t level = 0;     // n(epsilon)
  std::size_t n_cells = 0;   // cell count at that level
  double exponent = 0.0;     // n_cells * log(1/epsilon)
  double log10_exponent = 0.0;
};

// The small-deviation lower-bound exponent N_{n(eps)} * log(1/eps): the ball
// probability at radius 2 * eps * sigma is at least a constant times
// exp(-exponent). Requires epsilon in (0,1) on top of the n_of_epsilon domain.
ChainLowerBound mm_lower_exponent(const PartitionChain& chain, const MajorizingMeasure& mu,
                                  const WeightSequence& v, double epsilon, double sigma);

// Builds the chain by greedy covers at radius 2^-(n+1) D, nearest-center
// assignment (lowest center index on ties), and intersection with the previous
// level; verifies every invariant exhaustively before returning. Throws
// std::domain_error for depth < 1 or an empty space, std::logic_error if a
// constructed cell ever violates its diameter bound.
PartitionChain build_partition_chain(const FiniteMetricSpace& space, std::size_t depth);

// Exhaustive invariant check usable on hand-built chains: shape, nestedness,
// cell-diameter bounds against the chain diameter, nondecreasing cell counts.
// Throws std::logic_error on the first violation.
void verify_partition_chain(const PartitionChain& chain, const FiniteMetricSpace& space);

// The chain on the uniform grid {i 2^-J : 0 <= i <= 2^J} of [0,1] whose
// level-m cells are the dyadic intervals of length 2^-m (the right endpoint
// joins the last cell). Requires 1 <= depth <= log2_points <= 20; diameters
// are checked exactly from the interval endpoints.
PartitionChain dyadic_interval_chain(std::size_t log2_points, std::size_t depth);

// The companion integral for the unit interval with quadratic modulus
// weights: integral over u in (0, eps] of sqrt(log(2/u^3)) du, evaluated by an
// exponential-substitution trapezoid rule accurate to ~1e-8 relative.
// Requires 0 < eps <= 1.
double interval_modulus_integral(double eps);

// CSV "level,N_n,H_n" for levels 0..max_level (certified H values).
std::string chain_levels_csv(const PartitionChain& chain, const MajorizingMeasure& mu,
                             const WeightSequence& v, std::size_t max_level);

// CSV "epsilon,n_eps,exponent" for the given thresholds.
std::string chain_epsilon_csv(const PartitionChain& chain, const MajorizingMeasure& mu,
                              const WeightSequence& v, double sigma,
                              const std::vector<double>& epsilons);

}  // namespace smallball
