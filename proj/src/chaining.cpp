#include "smallball/chaining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace smallball {

namespace {

// Per-level cell measures; throws on empty or nonpositive cells.
std::vector<std::vector<double>> cell_measures(const PartitionChain& chain,
                                               const MajorizingMeasure& mu) {
  std::vector<std::vector<double>> out(chain.cells.size());
  for (std::size_t level = 0; level < chain.cells.size(); ++level) {
    out[level].resize(chain.cells[level].size(), 0.0);
    for (std::size_t c = 0; c < chain.cells[level].size(); ++c) {
      double m = 0.0;
      for (std::size_t p : chain.cells[level][c]) m += mu.weights[p];
      if (!(m > 0.0)) throw std::domain_error("zero-measure cell in the chain");
      out[level][c] = m;
    }
  }
  return out;
}

void check_weight_envelope(const WeightSequence& v, std::size_t from, std::size_t count) {
  for (std::size_t m = from; m < from + count; ++m) {
    const double value = v.v(m);
    if (!(value > 0.0)) throw std::invalid_argument("weight sequence must be positive");
    if (!std::isfinite(value)) continue;  // past double range; the envelope stays caller-certified
    if (std::log(value) > v.log_coef_a + v.log_coef_b * static_cast<double>(m) + 1e-9)
      throw std::invalid_argument("weight sequence exceeds its certified log envelope");
  }
}

}  // namespace

std::size_t PartitionChain::n_cells(std::size_t level) const {
  if (level >= cells.size()) level = cells.size() - 1;
  return cells[level].size();
}

double PartitionChain::level_scale(std::size_t level) const {
  return std::ldexp(diameter, -static_cast<int>(level));
}

std::size_t PartitionChain::cell_of(std::size_t point, std::size_t level) const {
  if (level >= cell_index.size()) level = cell_index.size() - 1;
  return cell_index[level].at(point);
}

MajorizingMeasure uniform_measure(std::size_t n_points) {
  if (n_points == 0) throw std::domain_error("measure needs at least one point");
  return MajorizingMeasure{
      std::vector<double>(n_points, 1.0 / static_cast<double>(n_points))};
}

void validate_measure(const MajorizingMeasure& mu, std::size_t n_points) {
  if (mu.weights.size() != n_points)
    throw std::invalid_argument("measure size does not match the point count");
  double sum = 0.0;
  for (double w : mu.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("measure weights must be nonnegative");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("measure weights must sum to 1");
}

WeightSequence square_weights() {
  WeightSequence w;
  w.v = [](std::size_t m) { return static_cast<double>(m) * static_cast<double>(m); };
  // 2 log m <= m for every m >= 1 (the gap is minimal near m = 2).
  w.log_coef_a = 0.0;
  w.log_coef_b = 1.0;
  return w;
}

WeightSequence geometric_weights(double diameter) {
  if (!(diameter > 0.0)) throw std::domain_error("diameter must be positive");
  WeightSequence w;
  const double d2 = diameter * diameter;
  w.v = [d2](std::size_t m) { return std::ldexp(1.0, 2 * static_cast<int>(m)) / d2; };
  w.log_coef_a = std::max(0.0, -2.0 * std::log(diameter));
  w.log_coef_b = 2.0 * std::log(2.0);
  return w;
}

double weight_tail_certificate(const WeightSequence& v, std::size_t cutoff) {
  if (cutoff < 2) throw std::domain_error("cutoff must be at least 2");
  double prev_ratio = 4.0 / v.v(2);
  if (!(prev_ratio > 0.0)) throw std::invalid_argument("weight sequence must be positive");
  for (std::size_t m = 3; m <= cutoff; ++m) {
    const double value = v.v(m);
    if (!(value > 0.0)) throw std::invalid_argument("weight sequence must be positive");
    const double ratio = static_cast<double>(m) * static_cast<double>(m) / value;
    if (ratio > prev_ratio * (1.0 + 1e-12))
      throw std::invalid_argument(
          "m^2/v(m) increases on the checked range; tail certificate unavailable");
    prev_ratio = ratio;
  }
  // sum_{m>M} 1/v(m) <= (M^2/v(M)) sum_{m>M} 1/m^2 <= (M^2/v(M)) / M.
  return prev_ratio / static_cast<double>(cutoff);
}

TailFunctional h_function(const PartitionChain& chain, const MajorizingMeasure& mu,
                          const WeightSequence& v, std::size_t n, std::size_t depth_cutoff) {
  if (chain.cell_index.empty()) throw std::domain_error("chain has no levels");
  validate_measure(mu, chain.n_points());
  const std::vector<std::vector<double>> measures = cell_measures(chain, mu);
  const double d = chain.diameter;
  const std::size_t depth = chain.depth();
  const std::size_t cutoff = std::max(n, depth_cutoff);

  // Explicit level terms m in (n, cutoff].
  std::vector<double> log_v(cutoff + 1, 0.0);
  for (std::size_t m = n + 1; m <= cutoff; ++m) {
    const double value = v.v(m);
    if (!(value >= 1.0))
      throw std::domain_error("weight sequence must be >= 1 on the summed levels");
    log_v[m] = std::log(value);
  }
  double sup = 0.0;
  for (std::size_t t = 0; t < chain.n_points(); ++t) {
    double acc = 0.0;
    for (std::size_t m = n + 1; m <= cutoff; ++m) {
      const std::size_t lvl = std::min(m, depth);
      const double cell_mu = measures[lvl][chain.cell_index[lvl][t]];
      const double log_ratio = log_v[m] - std::log(cell_mu);
      if (log_ratio < -1e-12)
        throw std::domain_error("v(m)/mu(cell) fell below 1; tail term undefined");
      acc += std::ldexp(d, -static_cast<int>(m)) * std::sqrt(std::max(0.0, log_ratio));
    }
    sup = std::max(sup, acc);
  }

  // Remainder past the cutoff: with log v(m) <= a + b m and every cell measure
  // at least the smallest deepest-level one,
  //   sum_{m>M} 2^-m sqrt(c + b m) <= 2^-M (sqrt(c) + 2 sqrt(b) sqrt(M+1)),
  // where c = a + log(1/mu_min).
  check_weight_envelope(v, cutoff + 1, 64);
  double mu_min = 1.0;
  for (double m : measures[depth]) mu_min = std::min(mu_min, m);
  const double c = std::max(0.0, v.log_coef_a + std::log(1.0 / mu_min));
  const double b = std::max(0.0, v.log_coef_b);
  const double tail = std::ldexp(d, -static_cast<int>(cutoff)) *
                      (std::sqrt(c) + 2.0 * std::sqrt(b * (static_cast<double>(cutoff) + 1.0)));

  if (tail > 1e-6 * std::max(sup, chain.level_scale(n)))
    throw std::domain_error("tail beyond depth_cutoff is not negligible; increase depth_cutoff");
  return TailFunctional{sup, tail};
}

namespace {

double certified_h(const PartitionChain& chain, const MajorizingMeasure& mu,
                   const WeightSequence& v, std::size_t n) {
  const TailFunctional h = h_function(chain, mu, v, n, std::max<std::size_t>(64, n + 40));
  return h.value + h.tail_bound;
}

}  // namespace

std::size_t n_of_epsilon(const PartitionChain& chain, const MajorizingMeasure& mu,
                         const WeightSequence& v, double epsilon, double sigma) {
  if (!(epsilon > 0.0) || !(sigma > 0.0))
    throw std::domain_error("epsilon and sigma must be positive");
  const double target = epsilon * sigma;
  if (!(target < certified_h(chain, mu, v, 0)))
    throw std::domain_error("epsilon * sigma must be below H(0)");
  const std::size_t depth = chain.depth();
  for (std::size_t n = 1; n <= depth; ++n)
    if (certified_h(chain, mu, v, n) <= target) return n;
  for (std::size_t n = depth + 1; n <= depth + 600; ++n) {
    if (certified_h(chain, mu, v, n) <= target) {
      char msg[128];
      std::snprintf(msg, sizeof(msg), "chain too shallow: depth of at least %zu is required", n);
      throw std::domain_error(msg);
    }
  }
  throw std::domain_error("chain too shallow: required depth exceeds the search limit");
}

ChainLowerBound mm_lower_exponent(const PartitionChain& chain, const MajorizingMeasure& mu,
                                  const WeightSequence& v, double epsilon, double sigma) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::domain_error("epsilon must lie in (0,1)");
  ChainLowerBound out;
  out.level = n_of_epsilon(chain, mu, v, epsilon, sigma);
  out.n_cells = chain.n_cells(out.level);
  const double log_inv = std::log(1.0 / epsilon);
  out.exponent = static_cast<double>(out.n_cells) * log_inv;
  out.log10_exponent = std::log10(static_cast<double>(out.n_cells)) + std::log10(log_inv);
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> cells_from_index(const std::vector<std::size_t>& index) {
  std::size_t n_cells = 0;
  for (std::size_t id : index) n_cells = std::max(n_cells, id + 1);
  std::vector<std::vector<std::size_t>> cells(n_cells);
  for (std::size_t p = 0; p < index.size(); ++p) cells[index[p]].push_back(p);
  return cells;
}

}  // namespace

PartitionChain build_partition_chain(const FiniteMetricSpace& space, std::size_t depth) {
  if (space.n == 0) throw std::domain_error("space is empty");
  if (depth < 1) throw std::domain_error("depth must be at least 1");
  PartitionChain chain;
  chain.diameter = space.diameter();
  chain.cell_index.assign(depth + 1, std::vector<std::size_t>(space.n, 0));

  for (std::size_t n = 1; n <= depth && chain.diameter > 0.0; ++n) {
    const double radius = std::ldexp(chain.diameter, -static_cast<int>(n) - 1);
    const CoveringResult cover = greedy_cover(space, radius, CoverMode::kFirstPoint);
    const std::vector<std::size_t>& prev = chain.cell_index[n - 1];
    std::vector<std::size_t>& cur = chain.cell_index[n];
    std::unordered_map<std::uint64_t, std::size_t> ids;
    for (std::size_t t = 0; t < space.n; ++t) {
      std::size_t best = 0;
      double best_d = space.dist(t, cover.centers[0]);
      for (std::size_t c = 1; c < cover.centers.size(); ++c) {
        const double dc = space.dist(t, cover.centers[c]);
        if (dc < best_d) {  // ties keep the earlier (lower-index) center
          best_d = dc;
          best = c;
        }
      }
      const std::uint64_t key =
          static_cast<std::uint64_t>(prev[t]) * cover.centers.size() + best;
      cur[t] = ids.emplace(key, ids.size()).first->second;
    }
  }

  chain.cells.resize(depth + 1);
  for (std::size_t n = 0; n <= depth; ++n) chain.cells[n] = cells_from_index(chain.cell_index[n]);
  verify_partition_chain(chain, space);
  return chain;
}

void verify_partition_chain(const PartitionChain& chain, const FiniteMetricSpace& space) {
  if (chain.cell_index.empty()) throw std::logic_error("chain has no levels");
  if (chain.cells.size() != chain.cell_index.size())
    throw std::logic_error("cell lists and cell indices disagree on depth");
  const std::size_t n = space.n;
  std::size_t prev_cells = 0;
  for (std::size_t level = 0; level < chain.cells.size(); ++level) {
    const std::vector<std::size_t>& index = chain.cell_index[level];
    if (index.size() != n) throw std::logic_error("level size does not match the space");
    const std::vector<std::vector<std::size_t>>& cells = chain.cells[level];
    std::size_t total = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) throw std::logic_error("empty cell");
      if (c > 0 && cells[c][0] <= cells[c - 1][0])
        throw std::logic_error("cells are not ordered by smallest member");
      for (std::size_t p : cells[c]) {
        if (p >= n || index[p] != c) throw std::logic_error("cell list and index disagree");
        ++total;
      }
      // Nestedness: every member shares the previous-level cell.
      if (level > 0) {
        const std::size_t parent = chain.cell_index[level - 1][cells[c][0]];
        for (std::size_t p : cells[c])
          if (chain.cell_index[level - 1][p] != parent)
            throw std::logic_error("cell straddles two parent cells");
      }
      // Diameter bound at this level.
      const double bound = chain.level_scale(level) * (1.0 + 1e-9);
      for (std::size_t i = 0; i < cells[c].size(); ++i)
        for (std::size_t j = i + 1; j < cells[c].size(); ++j)
          if (space.dist(cells[c][i], cells[c][j]) > bound)
            throw std::logic_error("cell diameter exceeds its level bound");
    }
    if (total != n) throw std::logic_error("cells do not partition the space");
    if (level == 0 && cells.size() != 1) throw std::logic_error("level 0 must be a single cell");
    if (cells.size() < prev_cells) throw std::logic_error("cell count decreased with the level");
    prev_cells = cells.size();
  }
}

PartitionChain dyadic_interval_chain(std::size_t log2_points, std::size_t depth) {
  if (depth < 1 || depth > log2_points || log2_points > 20)
    throw std::domain_error("need 1 <= depth <= log2_points <= 20");
  const std::size_t j = log2_points;
  const std::size_t n = (std::size_t{1} << j) + 1;
  PartitionChain chain;
  chain.diameter = 1.0;
  chain.cell_index.assign(depth + 1, std::vector<std::size_t>(n, 0));
  for (std::size_t m = 1; m <= depth; ++m) {
    const std::size_t last = (std::size_t{1} << m) - 1;
    for (std::size_t i = 0; i < n; ++i)
      chain.cell_index[m][i] = std::min(i >> (j - m), last);
  }
  chain.cells.resize(depth + 1);
  for (std::size_t m = 0; m <= depth; ++m) {
    chain.cells[m] = cells_from_index(chain.cell_index[m]);
    // Exact diameter check from the interval endpoints: a cell spans at most
    // 2^(j-m) grid steps of size 2^-j.
    for (const std::vector<std::size_t>& cell : chain.cells[m]) {
      const std::size_t span = cell.back() - cell.front();
      if (span > (std::size_t{1} << (j - m)))
        throw std::logic_error("dyadic cell spans more than its interval");
    }
  }
  return chain;
}

double interval_modulus_integral(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw std::domain_error("eps must lie in (0,1]");
  // Substituting u = eps e^-s turns the integral into
  //   eps * integral over s >= 0 of e^-s sqrt(L + 3 s) ds,  L = log(2/eps^3),
  // a smooth exponentially decaying integrand.
  const double big_l = std::log(2.0) - 3.0 * std::log(eps);
  const std::size_t steps = 200000;
  const double s_max = 60.0;
  const double h = s_max / static_cast<double>(steps);
  auto g = [big_l](double s) { return std::exp(-s) * std::sqrt(big_l + 3.0 * s); };
  double acc = 0.5 * (g(0.0) + g(s_max));
  for (std::size_t k = 1; k < steps; ++k) acc += g(static_cast<double>(k) * h);
  return eps * h * acc;
}

std::string chain_levels_csv(const PartitionChain& chain, const MajorizingMeasure& mu,
                             const WeightSequence& v, std::size_t max_level) {
  if (max_level > chain.depth()) throw std::domain_error("max_level exceeds the chain depth");
  std::string out = "level,N_n,H_n\n";
  char line[96];
  for (std::size_t n = 0; n <= max_level; ++n) {
    std::snprintf(line, sizeof(line), "%zu,%zu,%.17g\n", n, chain.n_cells(n),
                  certified_h(chain, mu, v, n));
    out += line;
  }
  return out;
}

std::string chain_epsilon_csv(const PartitionChain& chain, const MajorizingMeasure& mu,
                              const WeightSequence& v, double sigma,
                              const std::vector<double>& epsilons) {
  std::string out = "epsilon,n_eps,exponent\n";
  char line[96];
  for (double eps : epsilons) {
    const ChainLowerBound b = mm_lower_exponent(chain, mu, v, eps, sigma);
    std::snprintf(line, sizeof(line), "%.17g,%zu,%.17g\n", eps, b.level, b.exponent);
    out += line;
  }
  return out;
}

}  // namespace smallball
