#pragma once
// Small-deviation probability machinery: Monte Carlo estimation of
// P{sup |X| <= eps} on grids, the exact rank-one formula, certified
// log-domain products for independent structures, two-sided geometric-series
// ball bounds, the entropy-functional lower bound, and the product-vs-joint
// comparison for Gaussian vectors.

#include <cstddef>
#include <functional>
#include <vector>

#include "smallball/loud.hpp"
#include "smallball/process.hpp"
#include "smallball/rng.hpp"

namespace smallball {

struct McEstimate {
  double epsilon = 0.0;
  double p_hat = 0.0;
  double std_err = 0.0;  // sqrt(p(1-p)/n)
  // Intrinsic-metric discretization note: an upper bound on d(t, grid) over the
  // continuum, modulus_K * (mesh/2)^modulus_alpha, where the model certifies a
  // modulus; 0 when the grid is the model's whole domain.
  double bias_note = 0.0;
  std::size_t n_samples = 0;
  std::size_t grid_size = 0;
  SeedSpec seed;
};

// One pass over n_samples paths evaluates every threshold; byte-identical
// basis columns are collapsed first (the sup is unchanged). Thresholds must be
// positive; n_samples >= 1. Throws std::length_error past the flop budget.
std::vector<McEstimate> mc_small_ball(const ProcessModel& model,
                                      const std::vector<double>& epsilons, std::size_t n_samples,
                                      SeedSpec seed);

struct RankOneBall {
  double p_grid = 0.0;      // 2 Phi(eps / m_grid) - 1
  double p_envelope = 0.0;  // same with the modulus-corrected sup, a floor
  double m_grid = 0.0;      // sup over the grid of |f|
  double m_envelope = 0.0;  // m_grid + modulus_K * (mesh/2)^alpha
};
// Exact small-ball law of the rank-one model X = g * f. Wrong kind -> throws.
RankOneBall scaled_loud_exact(const ProcessModel& model, double epsilon);

struct ProductBound {
  double log_value = 0.0;         // log of the computed finite product
  std::size_t n_factors_used = 0;
  double tail_log_bound = 0.0;    // >= |log contribution| of all omitted factors
};

// Increasing sequence weight with an analytic growth floor used to certify
// product tails: value(n) >= floor_coef * (log(n+2))^floor_beta for n >=
// floor_from, floor_beta > 1/2.
struct IncreasingPhi {
  std::function<double(double)> value;
  double floor_coef = 1.0;
  double floor_beta = 1.0;
  double floor_from = 1.0;
};
// The shipped family phi(n) = (log(n+2))^beta (its own exact floor).
IncreasingPhi log_power_phi(double beta);

// P{sup_n |g_n|/phi(n) <= eps} = prod_n P{|g| <= eps phi(n)} by independence.
// Sums log factors until the certified tail drops below rel_tol; the true log
// probability lies in [log_value - tail_log_bound, log_value]. The number of
// factors needed grows like exp(const/eps^(1/beta)), so small eps belongs to
// sequence_log_neg_log instead; past the factor budget this throws.
ProductBound independent_product(const IncreasingPhi& phi, double epsilon,
                                 double rel_tol = 1e-6);

// log(-log P) for the same product with phi(n) = (log(n+2))^beta, evaluated
// stably for epsilon far below where -log P itself overflows (direct summation
// spliced with a log-domain integral over v = log(n+2)).
double sequence_log_neg_log(double beta, double epsilon);

struct BallBoundPair {
  ProductBound lower;  // lower.log_value is the certified lower bound itself
  ProductBound upper;  // truncated product; always a valid upper bound
};

// Two-sided bounds on log P{sum_n |g_n| rho^n <= eps}: the lower bound forces
// |g_n| <= (eps/H) rho^(-n/2) with H = sqrt(rho)/(1-sqrt(rho)); the upper
// keeps the necessary conditions |g_n| rho^n <= eps only up to
// N' = sup{n : rho^(-n) <= 1/sqrt(eps)}.
BallBoundPair geometric_ball_bounds(double rho, double epsilon);

// Two-sided bounds on log P{sup_t |X(t)| <= eps} for the independent-teeth
// series: lower via the amplitude sum (geometric bound at rho = amplitude
// ratio), upper via the diagonal-point recursion factors
// P{|g_k| <= (1 + period_ratio) * eps / amplitude_ratio^k}.
BallBoundPair loudseries_sandwich(const LoudFamily& fam, double epsilon);

struct DoublingReport {
  double c1 = 0.0;  // min over the range of phi(eps/2)/phi(eps)
  double c2 = 0.0;  // max
};
DoublingReport doubling_report(const std::function<double(double)>& phi_entropy, double eps_min,
                               double eps_max, std::size_t n_points = 64);
// The entropy-functional lower-bound exponent: returns -K * phi_entropy(eps).
double talagrand_lower_bound(const std::function<double(double)>& phi_entropy, double K,
                             double epsilon);

struct SidakReport {
  double product_p = 0.0;    // exact product of the marginal interval masses
  double joint_p_hat = 0.0;  // MC estimate of the joint probability
  double std_err = 0.0;
  bool product_le_joint = false;  // product <= joint + 3 std_err
  bool equality_case = false;     // |product - joint| <= 3 std_err
};
// cov is row-major dim x dim, symmetric PSD, dim <= 10. MC uses a
// semidefinite Cholesky factor; non-PSD input throws std::invalid_argument.
SidakReport sidak_check(const std::vector<double>& cov, std::size_t dim, double z,
                        std::size_t n_samples, SeedSpec seed);

}  // namespace smallball
