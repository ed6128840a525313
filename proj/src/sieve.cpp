#include "smallball/sieve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "smallball/process.hpp"

namespace smallball {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Normalizer of mu{t} = c t^-2: c = 6/pi^2.
double measure_norm() { return 6.0 / (kPi * kPi); }

// phi(t) >= 1/eps_level(n) iff log(t+2) >= y_n with y_n = (1/eps_level(n))^(1/beta).
double log_threshold_exponent(const SieveModel& m, int n) {
  const double inv_eps = std::ldexp(1.0, n - 1) * std::pow(std::log(3.0), m.beta);
  return std::pow(inv_eps, 1.0 / m.beta);
}

struct CertifiedSum {
  double value;
  double remainder;
};

// Sum of term(m) for m >= first with a geometric remainder certificate from
// the observed term ratios. Throws if the ratios never settle below 0.97.
template <typename F>
CertifiedSum certified_sum(F&& term, int first, const char* what) {
  double acc = 0.0;
  double prev = -1.0;
  double recent[4] = {1.0, 1.0, 1.0, 1.0};
  int filled = 0;
  for (int m = first; m <= first + 1400; ++m) {
    const double t = term(m);
    if (!(t >= 0.0) || !std::isfinite(t))
      throw std::runtime_error(std::string("bad term in the level sum for ") + what);
    acc += t;
    if (prev > 0.0) recent[(filled++) & 3] = t / prev;
    prev = t;
    if (m >= first + 15 && filled >= 4) {
      const double rmax = std::max(std::max(recent[0], recent[1]), std::max(recent[2], recent[3]));
      if (rmax <= 0.97 && t <= 1e-12 * std::max(acc, 1e-300)) {
        const double rem = t * rmax / (1.0 - rmax);
        if (rem <= 1e-9 * std::max(acc, 1e-300)) return {acc, rem};
      }
    }
  }
  throw std::runtime_error(std::string("level sum failed to certify for ") + what);
}

}  // namespace

double SieveModel::phi(double u) const { return std::pow(std::log(u + 2.0), beta); }
double SieveModel::sigma() const { return 1.0 / phi(1.0); }
double SieveModel::level_scale() const { return 2.0 * sigma(); }
double SieveModel::eps_level(int n) const { return std::ldexp(level_scale(), -n); }
double SieveModel::chain_diameter() const { return 2.0 * std::sqrt(2.0) * sigma(); }

SieveModel make_sieve_model(double beta) {
  if (!(beta > 0.5))
    throw std::invalid_argument("beta must exceed 1/2 for the growth condition");
  if (!(beta <= 8.0)) throw std::invalid_argument("beta above 8 is not supported");
  SieveModel m;
  m.beta = beta;
  return m;
}

std::int64_t sieve_F_exact(const SieveModel& model, int n) {
  if (n < 1) throw std::domain_error("level must be at least 1");
  if (model.beta == 1.0) {
    // F_n + 2 = 3^(2^(n-1)) exactly; repeated squaring keeps it in integers.
    if (n > 6) throw std::overflow_error("threshold exceeds 62 bits");
    std::int64_t p = 3;
    for (int k = 1; k < n; ++k) p *= p;
    return p - 2;
  }
  const double y = log_threshold_exponent(model, n);
  if (y > 42.0) throw std::overflow_error("threshold exceeds 62 bits");
  const double bar = std::pow(std::log(3.0), model.beta) * std::ldexp(1.0, n - 1);
  std::int64_t t = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(std::exp(y) - 2.0)) - 2);
  while (std::pow(std::log(static_cast<double>(t) + 2.0), model.beta) < bar) ++t;
  return t;
}

double sieve_log_F(const SieveModel& model, int n) {
  if (n < 1) throw std::domain_error("level must be at least 1");
  const double y = log_threshold_exponent(model, n);
  if (y <= 42.0) return std::log(static_cast<double>(sieve_F_exact(model, n)));
  // F_n = ceil(e^y) - 2; the -2 shifts the log by under 3 e^-y here.
  return y + std::log1p(-2.0 * std::exp(-y));
}

double trigamma(double x) {
  if (!(x >= 1.0)) throw std::domain_error("trigamma needs x >= 1");
  double acc = 0.0;
  while (x < 12.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return acc + inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 +
                                                inv2 * (-1.0 / 30.0 +
                                                        inv2 * (1.0 / 42.0 - inv2 / 30.0)))));
}

double sieve_log_tail_measure(const SieveModel& model, int n) {
  const double log_c = std::log(measure_norm());
  if (log_threshold_exponent(model, n) <= 42.0)
    return log_c + std::log(trigamma(static_cast<double>(sieve_F_exact(model, n))));
  return log_c - sieve_log_F(model, n);  // psi'(F) = 1/F up to O(1/F^2)
}

namespace {

double tail_cell_term(const SieveModel& model, int m) {
  const double arg =
      2.0 * std::log(static_cast<double>(m)) - sieve_log_tail_measure(model, m);
  return std::ldexp(model.chain_diameter(), -m) * std::sqrt(std::max(0.0, arg));
}

}  // namespace

SieveH sieve_h(const SieveModel& model, int n) {
  if (n < 0) throw std::domain_error("level must be nonnegative");
  const double log_c = std::log(measure_norm());
  const double d = model.chain_diameter();

  const CertifiedSum limit =
      certified_sum([&](int m) { return tail_cell_term(model, m); }, n + 1, "tail cells");
  double best = limit.value;
  double remainder = limit.remainder;

  // Finite sample family: small integers and the threshold edges.
  std::vector<std::int64_t> thresholds;
  for (int k = 1; k <= 40; ++k) {
    try {
      thresholds.push_back(sieve_F_exact(model, k));
    } catch (const std::overflow_error&) {
      break;
    }
  }
  std::vector<std::int64_t> samples;
  for (std::int64_t t = 1; t <= 32; ++t) samples.push_back(t);
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    samples.push_back(thresholds[k] - 1);
    samples.push_back(thresholds[k]);
    samples.push_back(thresholds[k] + 1);
  }
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());

  for (std::int64_t t : samples) {
    int nu = 0;
    for (std::size_t k = 0; k < thresholds.size(); ++k)
      if (thresholds[k] <= t) nu = static_cast<int>(k) + 1;
    double acc = 0.0;
    for (int m = n + 1; m <= nu; ++m) acc += tail_cell_term(model, m);
    const double log_t = std::log(static_cast<double>(t));
    const CertifiedSum sing = certified_sum(
        [&](int m) {
          const double arg = 2.0 * std::log(static_cast<double>(m)) + 2.0 * log_t - log_c;
          return std::ldexp(d, -m) * std::sqrt(std::max(0.0, arg));
        },
        std::max(n, nu) + 1, "singleton cells");
    best = std::max(best, acc + sing.value);
    remainder = std::max(remainder, sing.remainder);
  }
  return {best, remainder};
}

int sieve_n_of_epsilon(const SieveModel& model, double epsilon) {
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
  const double target = epsilon * model.sigma();
  const SieveH h0 = sieve_h(model, 0);
  if (!(target < h0.value))
    throw std::domain_error("epsilon * sigma must be below H(0)");
  for (int n = 1; n <= 1400; ++n) {
    const SieveH h = sieve_h(model, n);
    if (h.value + h.tail_bound <= target) return n;
  }
  throw std::runtime_error("level search exceeded its cap");
}

SieveLowerBound sieve_lower_exponent(const SieveModel& model, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::domain_error("epsilon must lie in (0,1)");
  SieveLowerBound out;
  out.level = sieve_n_of_epsilon(model, epsilon);
  const double log_f = sieve_log_F(model, out.level);
  const double log_exponent = log_f + std::log(std::log(1.0 / epsilon));
  out.log10_cells = log_f / std::log(10.0);
  out.log10_exponent = log_exponent / std::log(10.0);
  out.exponent = log_exponent < 709.0 ? std::exp(log_exponent) : HUGE_VAL;
  return out;
}

SieveGrowthReport sieve_growth_report(const SieveModel& model, std::size_t n_checked) {
  if (n_checked < 256) throw std::domain_error("n_checked must be at least 256");
  SieveGrowthReport out;
  out.sqrt_log_negligible = true;
  double prev = HUGE_VAL;
  double c_tech = 0.0;
  for (std::size_t m = 3; m <= n_checked; m = m < 4 ? 4 : 2 * m) {
    const double u = static_cast<double>(m);
    const double phi = model.phi(u);
    c_tech = std::max(c_tech, std::log(phi) / std::log(u));
    // The +2 shift inside phi inflates the first few dyadic ratios, so the
    // decrease is certified from 64 on, where it is monotone for every
    // admissible exponent.
    if (m >= 64) {
      const double ratio = std::sqrt(std::log(u)) / phi;
      if (ratio >= prev) out.sqrt_log_negligible = false;
      prev = ratio;
    }
  }
  out.sqrt_log_ratio_at_end = prev;
  out.log_phi_over_log_constant = c_tech;
  return out;
}

SieveBallReport sieve_ball_check(const SieveModel& model, std::int64_t u_max, int n_max) {
  if (u_max < 1 || u_max > (std::int64_t{1} << 22))
    throw std::domain_error("u_max must lie in [1, 2^22]");
  if (n_max < 1 || n_max > 60) throw std::domain_error("n_max must lie in [1, 60]");
  std::vector<std::int64_t> thresholds;
  for (int k = 1; k <= n_max; ++k) {
    try {
      thresholds.push_back(sieve_F_exact(model, k));
    } catch (const std::overflow_error&) {
      break;
    }
  }
  SieveBallReport out;
  for (std::int64_t u = 1; u <= u_max; ++u) {
    const double inv_phi = 1.0 / model.phi(static_cast<double>(u));
    int nu = 0;
    for (std::size_t k = 0; k < thresholds.size(); ++k)
      if (thresholds[k] <= u) nu = static_cast<int>(k) + 1;
    for (int n = 1; n <= n_max; ++n) {
      if (n == nu) continue;
      ++out.n_checked;
      if (n > nu) {
        // Ball is the singleton: the nearest other point (the tail limit) must
        // clear the level radius.
        if (inv_phi <= model.eps_level(n) * (1.0 - 1e-12)) ++out.n_violations;
      } else {
        // Ball swallows [F_{n+1}, inf): both u and the threshold sit within
        // eps_level(n+1), so any pair is within sqrt(2) * eps_level(n+1)
        // = eps_level(n) / sqrt(2).
        const double bound = model.eps_level(n + 1) * (1.0 + 1e-12);
        const double inv_phi_f =
            1.0 / model.phi(static_cast<double>(thresholds[static_cast<std::size_t>(n)]));
        if (inv_phi > bound || inv_phi_f > bound) ++out.n_violations;
      }
    }
  }
  return out;
}

SieveChain build_sieve_chain(const SieveModel& model, std::size_t n_max, std::size_t depth) {
  if (n_max < 2 || n_max > (std::size_t{1} << 20))
    throw std::domain_error("n_max must lie in [2, 2^20]");
  if (depth < 1 || depth > 60) throw std::domain_error("depth must lie in [1, 60]");

  SequenceParams sp;
  sp.beta = model.beta;
  sp.n_max = n_max;
  sp.include_infinity = true;
  const ProcessModel seq = build_independent_sequence(sp);
  const FiniteMetricSpace space = seq.metric_space();
  const std::size_t n_points = n_max + 1;  // integers 1..n_max plus the tail point

  SieveChain out;
  out.n_max = n_max;
  out.chain.diameter = model.chain_diameter();
  out.chain.cell_index.assign(depth + 1, std::vector<std::size_t>(n_points, 0));
  out.level_thresholds.assign(depth + 1, 1);

  for (std::size_t level = 1; level <= depth; ++level) {
    std::int64_t f;
    try {
      f = sieve_F_exact(model, static_cast<int>(level));
    } catch (const std::overflow_error&) {
      f = static_cast<std::int64_t>(n_max) + 1;
    }
    if (f > static_cast<std::int64_t>(n_max)) {
      f = static_cast<std::int64_t>(n_max) + 1;
      out.truncated = true;
    }
    out.level_thresholds[level] = f;
    // Point i < f-1 is the singleton {i+1}; everything from f-1 on (including
    // the tail point) forms the tail cell, whose id f-1 keeps cells ordered.
    const std::size_t split = static_cast<std::size_t>(f) - 1;
    for (std::size_t i = 0; i < n_points; ++i)
      out.chain.cell_index[level][i] = std::min(i, split);
  }

  out.chain.cells.resize(depth + 1);
  for (std::size_t level = 0; level <= depth; ++level) {
    std::size_t n_cells = 0;
    for (std::size_t id : out.chain.cell_index[level]) n_cells = std::max(n_cells, id + 1);
    out.chain.cells[level].assign(n_cells, {});
    for (std::size_t i = 0; i < n_points; ++i)
      out.chain.cells[level][out.chain.cell_index[level][i]].push_back(i);
  }

  const double c = measure_norm();
  out.measure.weights.resize(n_points);
  for (std::size_t i = 0; i < n_max; ++i) {
    const double u = static_cast<double>(i + 1);
    out.measure.weights[i] = c / (u * u);
  }
  out.measure.weights[n_max] = c * trigamma(static_cast<double>(n_max) + 1.0);
  validate_measure(out.measure, n_points);

  if (n_points <= 4097) {
    verify_partition_chain(out.chain, space);
  } else {
    // Closed-form tail-cell diameter: the two smallest members dominate.
    for (std::size_t level = 1; level <= depth; ++level) {
      const std::int64_t f = out.level_thresholds[level];
      double diam = 0.0;
      if (f <= static_cast<std::int64_t>(n_max) - 1) {
        const double a = 1.0 / model.phi(static_cast<double>(f));
        const double b = 1.0 / model.phi(static_cast<double>(f) + 1.0);
        diam = std::sqrt(a * a + b * b);
      } else if (f == static_cast<std::int64_t>(n_max)) {
        diam = 1.0 / model.phi(static_cast<double>(f));  // lone member to the tail point
      }
      if (diam > out.chain.level_scale(level) * (1.0 + 1e-12))
        throw std::logic_error("tail cell exceeds its level diameter bound");
    }
  }
  return out;
}

}  // namespace smallball
