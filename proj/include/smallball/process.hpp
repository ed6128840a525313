#pragma once
// Unified Gaussian process models on finite grids. Every process here is a
// finite linear combination X(t_i) = sum_k c_{k,i} g_k of independent standard
// normals, stored as sparse coefficient columns. That single representation
// yields the intrinsic L2 metric, path sampling, and sup-variance for all
// kinds; tree-indexed processes reuse it by filling the columns from a tree.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smallball/cover.hpp"
#include "smallball/rng.hpp"

namespace smallball {

enum class ProcessKind {
  kScaledLoud,           // X(t) = g * f(t), rank one
  kLoudSeries,           // X(t) = sum_k g_k phi_k(t), independent teeth
  kLifshits,             // X(t) = g0 t + sum_n g_n 2^(-alpha n/2) psi({2^n t})
  kAperiodicCoprime,     // X(t) = sum_p a_p g_p f_p(t) over coprime tooth stacks
  kIndependentSequence,  // Y(n) = g_n / phi(n), phi(n) = (log(n+2))^beta
  kUltrametricZ,         // Z(leaf) = sum of eps_n g_node along the ancestor path
};

struct SparseEntry {
  std::uint32_t k;
  double c;
};

struct BasisSet {
  std::size_t n_basis = 0;
  // columns[i], sorted by basis index, holds the coefficients of grid point i.
  std::vector<std::vector<SparseEntry>> columns;

  double column_norm(std::size_t i) const;
  // L2 norm of the difference of two columns (the intrinsic distance).
  double column_distance(std::size_t i, std::size_t j) const;
  // Maps every column to the index of its first byte-identical twin. Metric,
  // sampling, and sup statistics are unchanged when only representatives
  // (columns with rep[i] == i) are evaluated.
  std::vector<std::size_t> duplicate_representatives() const;
};

struct ProcessModel {
  ProcessKind kind = ProcessKind::kScaledLoud;
  // Coordinate of each column: time in [0,1], sequence index (infinity for the
  // zero tail point), or leaf id.
  std::vector<double> grid;
  BasisSet basis;
  bool path_ordered = false;
  double sup_sigma = 0.0;  // max over the grid of ||X(t)||_2
  // Certified envelope d(s,t) <= modulus_K * |s-t|^modulus_alpha where
  // available (tooth-stack kinds); modulus_K = 0 means no envelope is claimed.
  double modulus_K = 0.0;
  double modulus_alpha = 1.0;

  std::size_t n_points() const { return grid.size(); }
  double intrinsic_distance(std::size_t i, std::size_t j) const;
  // View as a finite metric space; the model must outlive the returned object.
  FiniteMetricSpace metric_space() const;
};

// --- builders -----------------------------------------------------------

struct LoudGridParams {
  int p = 2;
  int A = 2;
  double alpha = 0.5;
  // Grid: 2^log2_cells + 1 equispaced points on [0,1] (p-adic exact for p=2).
  std::size_t log2_cells = 12;
  double tail_tol = 1e-12;
};
ProcessModel build_scaled_loud(const LoudGridParams& params);
ProcessModel build_loud_series(const LoudGridParams& params);

struct LifshitsParams {
  double alpha = 0.5;
  std::size_t log2_cells = 12;  // step 2^(-J); the series is exactly finite on it
};
ProcessModel build_lifshits(const LifshitsParams& params);

// phi(n) = (log(n+2))^beta; the +2 shift keeps phi(1) positive.
double sequence_phi(double beta, double n);

struct SequenceParams {
  double beta = 1.0;
  std::size_t n_max = 4096;
  bool include_infinity = false;  // appends the zero random variable as a point
};
ProcessModel build_independent_sequence(const SequenceParams& params);

struct AperiodicSpec {
  std::vector<int> primes;          // pairwise coprime, each > 2
  std::vector<double> alpha_of_p;   // one per prime, in (0, 1/2), decreasing
  double beta = 0.25;               // weight a_p = 2^(-beta p)

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  double a(std::size_t idx) const;
};
// The shipped instance: primes {3,5,7,11,13}, alpha_p = 0.49/(log p *
// max(1, log log p)) (keeps every alpha_p inside (0,1/2)), beta = 1/4.
AperiodicSpec default_aperiodic_spec();

// Grid: 0 plus the designated lags p^(-2(m+1)), m = 1..m_max, for each p.
ProcessModel build_aperiodic(const AperiodicSpec& spec, std::size_t m_max = 5);

struct AperiodicWitnessRow {
  int p = 0;
  std::size_t m = 0;
  double lag = 0.0;       // |s-t| = p^(-2(m+1)), s = 0
  double own_term = 0.0;  // a_p |f_p(lag) - f_p(0)|, exact p-adic evaluation
  double full_dist = 0.0; // ||X(lag) - X(0)||_2 over all primes
  double lower_rhs = 0.0; // a_p kappa_p lag^alpha_p
  bool pass = false;      // own_term >= lower_rhs (hence full_dist >= too)
};
std::vector<AperiodicWitnessRow> aperiodic_witness_check(const AperiodicSpec& spec,
                                                         std::size_t m_max = 5);

struct AperiodicConditionReport {
  std::vector<double> alpha_log_p;  // alpha_p * log p per prime
  bool alpha_strictly_decreasing = false;
  bool alpha_log_p_nonincreasing = false;
  double sum_a_squared = 0.0;
};
AperiodicConditionReport aperiodic_condition_report(const AperiodicSpec& spec);

// --- sampling -----------------------------------------------------------

struct PathMatrix {
  std::size_t n_paths = 0;
  std::size_t n_points = 0;
  std::vector<double> values;  // row-major
  double at(std::size_t path, std::size_t point) const {
    return values[path * n_points + point];
  }
};

// Evaluates n_paths independent realizations at the requested column indices.
// Path r uses the substream {seed.master_seed, seed.stream_id + r}, so results
// are independent of threading. Throws std::length_error past the memory
// budget and std::out_of_range for bad indices.
PathMatrix sample_paths(const ProcessModel& model, const std::vector<std::size_t>& indices,
                        std::size_t n_paths, SeedSpec seed);
PathMatrix sample_paths(const ProcessModel& model, std::size_t n_paths, SeedSpec seed);

// Smallest-ratio fit of intrinsic_distance(s, s+lag) against lag^(alpha/2)
// over dyadic lags; the constant is reported, not asserted (no closed form).
struct LifshitsFit {
  double c_fit = 0.0;
  std::vector<std::pair<double, double>> per_lag_min;  // (lag, min ratio)
};
LifshitsFit lifshits_modulus_fit(const ProcessModel& model);

}  // namespace smallball
