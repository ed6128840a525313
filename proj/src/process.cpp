#include "smallball/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>

#include "smallball/loud.hpp"

namespace smallball {
namespace {

constexpr std::size_t kSampleBudget = std::size_t{1} << 25;  // matrix entries

std::vector<double> dyadic_grid(std::size_t log2_cells) {
  if (log2_cells < 1 || log2_cells > 24) throw std::invalid_argument("log2_cells must be in [1,24]");
  const std::size_t n = (std::size_t{1} << log2_cells) + 1;
  std::vector<double> t(n);
  for (std::size_t j = 0; j < n; ++j) t[j] = std::ldexp(static_cast<double>(j), -static_cast<int>(log2_cells));
  return t;
}

void finalize_sigma(ProcessModel* model) {
  double best = 0.0;
  for (std::size_t i = 0; i < model->basis.columns.size(); ++i)
    best = std::max(best, model->basis.column_norm(i));
  model->sup_sigma = best;
}

}  // namespace

double BasisSet::column_norm(std::size_t i) const {
  double s = 0.0;
  for (const SparseEntry& e : columns[i]) s += e.c * e.c;
  return std::sqrt(s);
}

double BasisSet::column_distance(std::size_t i, std::size_t j) const {
  const auto& a = columns[i];
  const auto& b = columns[j];
  double s = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() || ib < b.size()) {
    if (ib == b.size() || (ia < a.size() && a[ia].k < b[ib].k)) {
      s += a[ia].c * a[ia].c;
      ++ia;
    } else if (ia == a.size() || b[ib].k < a[ia].k) {
      s += b[ib].c * b[ib].c;
      ++ib;
    } else {
      const double d = a[ia].c - b[ib].c;
      s += d * d;
      ++ia;
      ++ib;
    }
  }
  return std::sqrt(s);
}

std::vector<std::size_t> BasisSet::duplicate_representatives() const {
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<std::size_t> rep(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::string key;
    key.resize(columns[i].size() * sizeof(SparseEntry));
    if (!columns[i].empty()) std::memcpy(key.data(), columns[i].data(), key.size());
    auto [it, inserted] = seen.emplace(std::move(key), i);
    rep[i] = it->second;
  }
  return rep;
}

double ProcessModel::intrinsic_distance(std::size_t i, std::size_t j) const {
  if (i >= n_points() || j >= n_points()) throw std::out_of_range("grid index out of range");
  if (i == j) return 0.0;
  return basis.column_distance(i, j);
}

FiniteMetricSpace ProcessModel::metric_space() const {
  FiniteMetricSpace s;
  s.n = n_points();
  const ProcessModel* self = this;
  s.dist = [self](std::size_t i, std::size_t j) { return self->intrinsic_distance(i, j); };
  s.path_ordered = path_ordered;
  return s;
}

ProcessModel build_scaled_loud(const LoudGridParams& params) {
  const LoudFamily fam(params.p, params.A, params.alpha, params.tail_tol);
  ProcessModel m;
  m.kind = ProcessKind::kScaledLoud;
  m.grid = dyadic_grid(params.log2_cells);
  m.path_ordered = true;
  m.basis.n_basis = 1;
  m.basis.columns.resize(m.grid.size());
  const int e = static_cast<int>(params.log2_cells);
  for (std::size_t j = 0; j < m.grid.size(); ++j) {
    const double v = params.p == 2 ? fam.f_at_padic(static_cast<std::int64_t>(j), e)
                                   : fam.f(m.grid[j]);
    if (v != 0.0) m.basis.columns[j].push_back({0, v});
  }
  m.modulus_K = fam.constants().K_script;
  m.modulus_alpha = params.alpha;
  finalize_sigma(&m);
  return m;
}

ProcessModel build_loud_series(const LoudGridParams& params) {
  const LoudFamily fam(params.p, params.A, params.alpha, params.tail_tol);
  ProcessModel m;
  m.kind = ProcessKind::kLoudSeries;
  m.grid = dyadic_grid(params.log2_cells);
  m.path_ordered = true;
  const int K = fam.truncation_level();
  m.basis.n_basis = static_cast<std::size_t>(K);
  m.basis.columns.resize(m.grid.size());
  const int e = static_cast<int>(params.log2_cells);
  for (std::size_t j = 0; j < m.grid.size(); ++j) {
    auto& col = m.basis.columns[j];
    for (int k = 1; k <= K; ++k) {
      const double v = params.p == 2 ? fam.basis_at_padic(k, static_cast<std::int64_t>(j), e)
                                     : fam.basis(k, m.grid[j]);
      if (v != 0.0) col.push_back({static_cast<std::uint32_t>(k - 1), v});
    }
  }
  m.modulus_K = fam.constants().c2;
  m.modulus_alpha = params.alpha;
  finalize_sigma(&m);
  return m;
}

ProcessModel build_lifshits(const LifshitsParams& params) {
  if (!(params.alpha > 0.0 && params.alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
  ProcessModel m;
  m.kind = ProcessKind::kLifshits;
  m.grid = dyadic_grid(params.log2_cells);
  m.path_ordered = true;
  const int J = static_cast<int>(params.log2_cells);
  // Teeth at levels n >= J vanish on the grid (psi of an integer is 0), so the
  // series is exactly finite: basis = drift + levels 1..J-1.
  m.basis.n_basis = static_cast<std::size_t>(J);
  m.basis.columns.resize(m.grid.size());
  const SawtoothSpec unit_tooth{0.5};
  const std::uint64_t mask = (std::uint64_t{1} << J) - 1;
  for (std::size_t j = 0; j < m.grid.size(); ++j) {
    auto& col = m.basis.columns[j];
    if (m.grid[j] != 0.0) col.push_back({0, m.grid[j]});
    for (int n = 1; n < J; ++n) {
      const std::uint64_t jn = (static_cast<std::uint64_t>(j) << n) & mask;
      if (jn == 0) continue;
      const double u = std::ldexp(static_cast<double>(jn), -J);
      const double psi = sawtooth_eval(unit_tooth, u);
      if (psi != 0.0)
        col.push_back({static_cast<std::uint32_t>(n), std::exp2(-0.5 * params.alpha * n) * psi});
    }
  }
  finalize_sigma(&m);
  return m;
}

double sequence_phi(double beta, double n) {
  if (!(n >= 1.0)) throw std::domain_error("sequence index must be >= 1");
  return std::pow(std::log(n + 2.0), beta);
}

ProcessModel build_independent_sequence(const SequenceParams& params) {
  if (!(params.beta > 0.5)) throw std::invalid_argument("beta must exceed 1/2");
  if (params.n_max < 1 || params.n_max > (std::size_t{1} << 20))
    throw std::invalid_argument("n_max must be in [1, 2^20]");
  ProcessModel m;
  m.kind = ProcessKind::kIndependentSequence;
  m.basis.n_basis = params.n_max;
  for (std::size_t n = 1; n <= params.n_max; ++n) {
    m.grid.push_back(static_cast<double>(n));
    m.basis.columns.push_back(
        {{static_cast<std::uint32_t>(n - 1), 1.0 / sequence_phi(params.beta, static_cast<double>(n))}});
  }
  if (params.include_infinity) {
    m.grid.push_back(std::numeric_limits<double>::infinity());
    m.basis.columns.emplace_back();  // the zero random variable
  }
  finalize_sigma(&m);
  return m;
}

void AperiodicSpec::validate() const {
  if (primes.empty()) throw std::invalid_argument("prime set must be nonempty");
  if (alpha_of_p.size() != primes.size())
    throw std::invalid_argument("alpha list must match prime list length");
  for (int p : primes)
    if (p <= 2) throw std::invalid_argument("prime entries must exceed 2");
  for (std::size_t i = 0; i < primes.size(); ++i)
    for (std::size_t j = i + 1; j < primes.size(); ++j)
      if (std::gcd(primes[i], primes[j]) != 1)
        throw std::invalid_argument("prime entries must be pairwise coprime");
  for (double a : alpha_of_p)
    if (!(a > 0.0 && a < 0.5)) throw std::invalid_argument("alpha values must lie in (0, 1/2)");
  for (std::size_t i = 1; i < alpha_of_p.size(); ++i)
    if (!(alpha_of_p[i] < alpha_of_p[i - 1]))
      throw std::invalid_argument("alpha values must be strictly decreasing");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
}

double AperiodicSpec::a(std::size_t idx) const {
  return std::exp2(-beta * static_cast<double>(primes[idx]));
}

AperiodicSpec default_aperiodic_spec() {
  AperiodicSpec spec;
  spec.primes = {3, 5, 7, 11, 13};
  for (int p : spec.primes) {
    const double lp = std::log(static_cast<double>(p));
    spec.alpha_of_p.push_back(0.49 / (lp * std::max(1.0, std::log(lp))));
  }
  spec.beta = 0.25;
  return spec;
}

ProcessModel build_aperiodic(const AperiodicSpec& spec, std::size_t m_max) {
  spec.validate();
  if (m_max < 1 || m_max > 12) throw std::invalid_argument("m_max must be in [1,12]");

  std::vector<LoudFamily> fams;
  fams.reserve(spec.primes.size());
  for (std::size_t i = 0; i < spec.primes.size(); ++i)
    fams.emplace_back(spec.primes[i], 1, spec.alpha_of_p[i]);

  ProcessModel m;
  m.kind = ProcessKind::kAperiodicCoprime;
  m.basis.n_basis = spec.primes.size();
  m.grid.push_back(0.0);
  m.basis.columns.emplace_back();  // every f_q(0) = 0
  for (std::size_t ip = 0; ip < spec.primes.size(); ++ip) {
    for (std::size_t mm = 1; mm <= m_max; ++mm) {
      const int e = 2 * static_cast<int>(mm + 1);
      const double t = std::pow(static_cast<double>(spec.primes[ip]), -e);
      m.grid.push_back(t);
      auto& col = m.basis.columns.emplace_back();
      for (std::size_t q = 0; q < spec.primes.size(); ++q) {
        // Exact p-adic evaluation on the prime's own lags; floating elsewhere.
        const double fq = q == ip ? fams[q].f_at_padic(1, e) : fams[q].f(t);
        if (fq != 0.0) col.push_back({static_cast<std::uint32_t>(q), spec.a(q) * fq});
      }
    }
  }
  double mod_sq = 0.0;
  for (std::size_t q = 0; q < spec.primes.size(); ++q) {
    const double aK = spec.a(q) * fams[q].constants().K_script;
    mod_sq += aK * aK;
  }
  m.modulus_K = std::sqrt(mod_sq);
  m.modulus_alpha = *std::min_element(spec.alpha_of_p.begin(), spec.alpha_of_p.end());
  finalize_sigma(&m);
  return m;
}

std::vector<AperiodicWitnessRow> aperiodic_witness_check(const AperiodicSpec& spec,
                                                         std::size_t m_max) {
  spec.validate();
  const ProcessModel model = build_aperiodic(spec, m_max);
  std::vector<AperiodicWitnessRow> rows;
  std::size_t grid_pos = 1;  // grid[0] is the origin
  for (std::size_t ip = 0; ip < spec.primes.size(); ++ip) {
    const LoudFamily fam(spec.primes[ip], 1, spec.alpha_of_p[ip]);
    const double kappa = fam.constants().kappa;
    for (std::size_t mm = 1; mm <= m_max; ++mm, ++grid_pos) {
      AperiodicWitnessRow row;
      row.p = spec.primes[ip];
      row.m = mm;
      const int e = 2 * static_cast<int>(mm + 1);
      row.lag = std::pow(static_cast<double>(row.p), -e);
      row.own_term = spec.a(ip) * std::fabs(fam.f_at_padic(1, e));
      row.full_dist = model.intrinsic_distance(0, grid_pos);
      row.lower_rhs = spec.a(ip) * kappa * std::pow(row.lag, spec.alpha_of_p[ip]);
      row.pass = row.own_term >= row.lower_rhs;
      rows.push_back(row);
    }
  }
  return rows;
}

AperiodicConditionReport aperiodic_condition_report(const AperiodicSpec& spec) {
  spec.validate();
  AperiodicConditionReport rep;
  for (std::size_t i = 0; i < spec.primes.size(); ++i) {
    rep.alpha_log_p.push_back(spec.alpha_of_p[i] * std::log(static_cast<double>(spec.primes[i])));
    rep.sum_a_squared += spec.a(i) * spec.a(i);
  }
  rep.alpha_strictly_decreasing = true;
  for (std::size_t i = 1; i < spec.alpha_of_p.size(); ++i)
    if (!(spec.alpha_of_p[i] < spec.alpha_of_p[i - 1])) rep.alpha_strictly_decreasing = false;
  rep.alpha_log_p_nonincreasing = true;
  for (std::size_t i = 1; i < rep.alpha_log_p.size(); ++i)
    if (rep.alpha_log_p[i] > rep.alpha_log_p[i - 1] + 1e-15) rep.alpha_log_p_nonincreasing = false;
  return rep;
}

PathMatrix sample_paths(const ProcessModel& model, const std::vector<std::size_t>& indices,
                        std::size_t n_paths, SeedSpec seed) {
  for (std::size_t i : indices)
    if (i >= model.n_points()) throw std::out_of_range("grid index out of range");
  if (n_paths * indices.size() > kSampleBudget)
    throw std::length_error("path sampling budget exceeded: n_paths * |grid| > 2^25");

  PathMatrix out;
  out.n_paths = n_paths;
  out.n_points = indices.size();
  out.values.assign(n_paths * indices.size(), 0.0);
  if (n_paths == 0 || indices.empty()) return out;

  std::size_t nnz = 0;
  for (std::size_t i : indices) nnz += model.basis.columns[i].size();
  // Few requested columns: random-access draws per entry; otherwise one dense
  // draw of the whole coefficient vector per path. Both paths produce
  // identical values (random access matches sequential generation).
  const bool dense = nnz >= model.basis.n_basis;

  auto worker = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> g;
    for (std::size_t r = lo; r < hi; ++r) {
      const SeedSpec path_seed{seed.master_seed, seed.stream_id + r};
      if (dense) {
        GaussianStream stream(path_seed);
        g.resize(model.basis.n_basis);
        stream.generate(g.data(), g.size());
      }
      double* row = out.values.data() + r * indices.size();
      for (std::size_t c = 0; c < indices.size(); ++c) {
        double acc = 0.0;
        for (const SparseEntry& e : model.basis.columns[indices[c]])
          acc += e.c * (dense ? g[e.k] : normal_at(path_seed, e.k));
        row[c] = acc;
      }
    }
  };

  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min<std::size_t>({hw, n_paths, 8});
  if (n_workers <= 1) {
    worker(0, n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_paths + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n_paths, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (std::thread& th : pool) th.join();
  }
  return out;
}

PathMatrix sample_paths(const ProcessModel& model, std::size_t n_paths, SeedSpec seed) {
  std::vector<std::size_t> all(model.n_points());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return sample_paths(model, all, n_paths, seed);
}

LifshitsFit lifshits_modulus_fit(const ProcessModel& model) {
  if (model.kind != ProcessKind::kLifshits)
    throw std::invalid_argument("modulus fit requires the dyadic-teeth kind");
  const std::size_t cells = model.n_points() - 1;
  // alpha is recoverable from the level-1 tooth amplitude when present; the
  // builder stores no parameters, so read the exponent off column values at
  // t = 1/4: entries (0, 1/4), (1, 2^(-alpha/2)).
  double alpha = 0.5;
  for (const SparseEntry& e : model.basis.columns[cells / 4])
    if (e.k == 1) alpha = -2.0 * std::log2(e.c);

  LifshitsFit fit;
  fit.c_fit = std::numeric_limits<double>::infinity();
  const std::size_t s_stride = std::max<std::size_t>(1, cells / 64);
  for (int L = 2; L <= 11; ++L) {
    if ((std::size_t{1} << L) > cells) break;
    const std::size_t lag_steps = cells >> L;
    const double lag = std::ldexp(1.0, -L);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s + lag_steps <= cells; s += s_stride)
      best = std::min(best,
                      model.intrinsic_distance(s, s + lag_steps) / std::pow(lag, 0.5 * alpha));
    fit.per_lag_min.emplace_back(lag, best);
    fit.c_fit = std::min(fit.c_fit, best);
  }
  return fit;
}

}  // namespace smallball
