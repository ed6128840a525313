#pragma once
// Finite metric spaces, greedy covering/packing numbers with bracket
// certificates, entropy curves, and log-log slope fits.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace smallball {

// A finite pseudo-metric space given by a distance callback. The callback must
// be symmetric with zero diagonal; triangle-inequality spot checks are part of
// the validation helper rather than every call.
struct FiniteMetricSpace {
  std::size_t n = 0;
  std::function<double(std::size_t, std::size_t)> dist;
  // True when indices follow a path through the space (1-D grids), enabling the
  // line-sweep cover mode.
  bool path_ordered = false;

  double diameter() const;
  // Checks symmetry/diagonal on all pairs and the triangle inequality on
  // sampled triples; throws std::logic_error on violation.
  void validate(std::size_t triangle_samples = 20000, std::uint64_t seed = 1) const;
};

struct CoveringResult {
  double epsilon = 0.0;
  std::size_t n_cover = 0;
  std::vector<std::size_t> centers;
  std::size_t n_packing = 0;
  std::vector<std::size_t> packing_points;
};

enum class CoverMode {
  // First uncovered point in index order becomes a center. Centers are then
  // pairwise > epsilon apart, so the center set doubles as a greedy packing.
  kFirstPoint,
  // For path-ordered spaces: from the first uncovered point, walk forward to
  // the farthest point still within epsilon and use that as the center (the
  // classic 1-D interval-stabbing sweep). Falls back to kFirstPoint when the
  // resulting cover fails validation (non-monotone metrics).
  kLineSweep,
};

// Greedy cover plus greedy maximal packing at the same radius. Throws
// std::domain_error for epsilon <= 0. Every returned cover is validated
// (each point within epsilon of a center) and every packing is > epsilon
// separated; the pair brackets the true covering number.
CoveringResult greedy_cover(const FiniteMetricSpace& space, double epsilon,
                            CoverMode mode = CoverMode::kFirstPoint);

struct EntropyRow {
  double epsilon;
  std::size_t n_cover;
  std::size_t n_packing;
};

// Covering/packing counts along a descending epsilon list. Throws on an empty
// or unsorted list; verifies monotonicity of the counts.
std::vector<EntropyRow> entropy_curve(const FiniteMetricSpace& space,
                                      const std::vector<double>& epsilons,
                                      CoverMode mode = CoverMode::kFirstPoint);

// CSV with header "epsilon,n_cover,n_packing".
std::string entropy_csv(const std::vector<EntropyRow>& rows);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_used = 0;
};

// Ordinary least squares of log y against log x over points whose x lies in
// [x_min, x_max]. Requires >= 3 usable points with positive coordinates.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points, double x_min,
                          double x_max);

}  // namespace smallball
