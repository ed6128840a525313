#pragma once
// Singleton-plus-tail partition chain for the weighted independent sequence
// X_u = g_u / phi(u), phi(u) = (log(u+2))^beta: the level thresholds F_n,
// the tail measure, an analytic evaluator for the level tail functional that
// works entirely in log space (the thresholds grow double exponentially), the
// resulting lower-bound exponent, and a materialized finite chain for
// cross-checking with the generic machinery.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smallball/chaining.hpp"

namespace smallball {

struct SieveModel {
  double beta = 1.0;

  double phi(double u) const;       // (log(u+2))^beta
  double sigma() const;             // sup of the coordinate deviations, 1/phi(1)
  // Scale defining the levels: eps_level(n) = 2^-n * level_scale with
  // level_scale = 2 sigma, so that 1/eps_level(1) = phi(1) and F_1 = 1.
  double level_scale() const;
  double eps_level(int n) const;
  // Diameter carried by the materialized chain: a tail cell reaches diameter
  // sqrt(2) * eps_level(n), so the chain is declared sqrt(2) wider.
  double chain_diameter() const;
};

// Throws std::invalid_argument for beta <= 1/2, where sqrt(log u) stops being
// negligible against phi(u) and the construction breaks down.
SieveModel make_sieve_model(double beta);

// log of the threshold F_n = min{ integer t >= 1 : phi(t) >= 1/eps_level(n) }.
// For beta = 1 the threshold is exactly 3^(2^(n-1)) - 2 and is computed in
// integer arithmetic whenever it fits.
double sieve_log_F(const SieveModel& model, int n);

// Exact integer threshold; throws std::overflow_error once it no longer fits
// in 62 bits (beta = 1: n >= 7).
std::int64_t sieve_F_exact(const SieveModel& model, int n);

// sum_{k >= 0} 1/(x+k)^2 for x >= 1 (Euler-Maclaurin with recurrence).
double trigamma(double x);

// log of the measure of the tail cell [F_n, inf) under mu{t} = c t^-2 with
// c = 6/pi^2.
double sieve_log_tail_measure(const SieveModel& model, int n);

struct SieveH {
  double value = 0.0;
  double tail_bound = 0.0;
};

// Analytic H(n) for the infinite chain at the chain-diameter scale with
// v(m) = m^2. The supremum over index points is attained in the t -> infinity
// limit for this growth family (a large singleton boosts one level by at most
// sqrt(2) while losing every deeper tail term); the evaluator computes that
// limit and cross-checks a finite sample family, returning the maximum with a
// certified truncation bound.
SieveH sieve_h(const SieveModel& model, int n);

// Smallest level n >= 1 with certified H(n) <= epsilon * sigma; requires
// epsilon * sigma < H(0) (std::domain_error otherwise).
int sieve_n_of_epsilon(const SieveModel& model, double epsilon);

struct SieveLowerBound {
  int level = 0;
  double log10_cells = 0.0;     // log10 of the cell count F_level
  double exponent = 0.0;        // F_level * log(1/eps); +inf once it overflows
  double log10_exponent = 0.0;  // always finite
};

// Lower-bound exponent N_{n(eps)} * log(1/eps) with N_n = F_n cells
// (singletons below F_n plus one tail cell). Requires epsilon in (0,1).
SieveLowerBound sieve_lower_exponent(const SieveModel& model, double epsilon);

struct SieveGrowthReport {
  // sqrt(log u) / phi(u) strictly decreasing along the checked dyadic range
  // from 64 on (the shift inside phi inflates the first few ratios).
  bool sqrt_log_negligible = false;
  double sqrt_log_ratio_at_end = 0.0;
  // Fitted sup of log phi(m) / log m over the range: recorded, not asserted.
  double log_phi_over_log_constant = 0.0;
};
SieveGrowthReport sieve_growth_report(const SieveModel& model, std::size_t n_checked = 1u << 20);

struct SieveBallReport {
  std::size_t n_checked = 0;
  std::size_t n_violations = 0;
};

// Ball structure of the sequence metric at the level scales, checked
// analytically for u = 1..u_max and n = 1..n_max (skipping the boundary level
// n = nu(u), where nu(u) is the deepest level with F_nu <= u):
//   n > nu(u): the closest other point is the tail limit at distance 1/phi(u),
//              which must clear eps_level(n), so the ball around u is {u};
//   n < nu(u): both 1/phi(u) and 1/phi(F_{n+1}) are below eps_level(n+1), so
//              every v >= F_{n+1} sits within eps_level(n) of u and the ball
//              swallows the whole tail.
// Floating-point slack 1e-12 relative; the exact-arithmetic direction is
// settled by the integer comparison against F_n.
SieveBallReport sieve_ball_check(const SieveModel& model, std::int64_t u_max, int n_max);

struct SieveChain {
  PartitionChain chain;
  MajorizingMeasure measure;
  // F_n per level, clamped to n_max + 1 once the threshold leaves the window.
  std::vector<std::int64_t> level_thresholds;
  std::size_t n_max = 0;
  bool truncated = false;  // some level threshold exceeded n_max
};

// Materializes the chain on {1..n_max} plus a tail point (the zero limit of
// the sequence), with level-n cells = singletons below F_n plus the tail cell
// and measure mu{u} = c u^-2 (the tail point absorbs the remaining mass).
// Invariants are checked exhaustively when the window is small (<= 4097
// points) and through the closed-form tail-cell diameter otherwise.
SieveChain build_sieve_chain(const SieveModel& model, std::size_t n_max, std::size_t depth);

}  // namespace smallball
