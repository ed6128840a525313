#include "smallball/small_ball.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "smallball/gauss.hpp"

namespace smallball {
namespace {

constexpr std::size_t kMcBudget = std::size_t{1} << 30;  // samples x column weight
constexpr double kInf = std::numeric_limits<double>::infinity();

double grid_mesh(const ProcessModel& model) {
  if (!model.path_ordered || model.grid.size() < 2) return 0.0;
  double mesh = 0.0;
  for (std::size_t i = 1; i < model.grid.size(); ++i)
    mesh = std::max(mesh, model.grid[i] - model.grid[i - 1]);
  return mesh;
}

// Certified bound on sum_{n >= 0} -log P{|g| <= z r^n} for z >= 1, r > 1:
// the tail probability t_n = P{|g| > z r^n} satisfies t_n <= e^(-z^2 r^(2n)/2)
// <= e^(-z^2/2) e^(-z^2 n log r) (convexity), and -log(1-t) <= 2t for t <= 1/2.
double product_log_tail_bound(double z, double r) {
  if (!(z >= 1.0) || !(r > 1.0)) return kInf;
  const double head = 2.0 * std::exp(-0.5 * z * z);
  const double decay = -std::expm1(-z * z * std::log(r));
  return head / decay;
}

ProductBound geometric_lower(double rho, double epsilon) {
  const double sqrt_rho = std::sqrt(rho);
  const double H = sqrt_rho / (1.0 - sqrt_rho);
  const double step = -0.5 * std::log(rho);  // z grows by e^step per factor
  ProductBound b;
  double acc = 0.0;
  for (std::size_t n = 1;; ++n) {
    const double z = (epsilon / H) * std::exp(step * static_cast<double>(n));
    if (z >= 2.0) {
      const double tail = product_log_tail_bound(z, std::exp(step));
      if (tail <= 1e-14 * (1.0 + std::fabs(acc))) {
        b.log_value = acc - tail;  // certified: the omitted factors cost at most tail
        b.tail_log_bound = tail;
        b.n_factors_used = n - 1;
        return b;
      }
    }
    acc += log_std_normal_interval(z);
    if (n > 200000) throw std::runtime_error("geometric lower bound failed to converge");
  }
}

ProductBound geometric_upper(double rho, double epsilon) {
  ProductBound b;
  if (epsilon >= 1.0) return b;  // empty product, log 1 = 0, trivially valid
  const double n_cut = 0.5 * std::log(1.0 / epsilon) / std::log(1.0 / rho);
  const std::size_t N = static_cast<std::size_t>(std::floor(n_cut));
  double acc = 0.0;
  for (std::size_t n = 1; n <= N; ++n)
    acc += log_std_normal_interval(epsilon * std::exp(-std::log(rho) * static_cast<double>(n)));
  b.log_value = acc;
  b.n_factors_used = N;
  b.tail_log_bound = 0.0;  // truncation only weakens an upper bound
  return b;
}

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// log(-log P{|g| <= z}) across the full range without under/overflow.
double log_q_of(double z) {
  if (!(z > 0.0)) return kInf;
  if (z < 2.6) return std::log(-log_std_normal_interval(z));
  const double lt = log_std_normal_two_tail(z);  // log P{|g| > z}
  // -log(1-t) = t (1 + t/2 + ...) and t < 1e-2 here.
  return lt + std::log1p(0.5 * std::exp(lt));
}

}  // namespace

std::vector<McEstimate> mc_small_ball(const ProcessModel& model,
                                      const std::vector<double>& epsilons, std::size_t n_samples,
                                      SeedSpec seed) {
  if (model.n_points() == 0) throw std::domain_error("model grid is empty");
  if (n_samples == 0) throw std::domain_error("n_samples must be positive");
  if (epsilons.empty()) throw std::domain_error("epsilon list is empty");
  for (double e : epsilons)
    if (!(e > 0.0)) throw std::domain_error("thresholds must be positive");

  const std::vector<std::size_t> rep = model.basis.duplicate_representatives();
  std::vector<const std::vector<SparseEntry>*> cols;
  std::size_t weight = 0;
  for (std::size_t i = 0; i < rep.size(); ++i) {
    if (rep[i] != i) continue;
    cols.push_back(&model.basis.columns[i]);
    weight += model.basis.columns[i].size();
  }
  if (n_samples * std::max<std::size_t>(weight, 1) > kMcBudget)
    throw std::length_error("Monte Carlo budget exceeded: n_samples x column weight > 2^30");

  const bool dense = weight >= model.basis.n_basis;
  std::vector<std::size_t> counts(epsilons.size(), 0);
  std::mutex merge_mutex;

  auto worker = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> local(epsilons.size(), 0);
    std::vector<double> g;
    for (std::size_t r = lo; r < hi; ++r) {
      const SeedSpec path_seed{seed.master_seed, seed.stream_id + r};
      if (dense) {
        GaussianStream stream(path_seed);
        g.resize(model.basis.n_basis);
        stream.generate(g.data(), g.size());
      }
      double sup = 0.0;
      for (const auto* col : cols) {
        double acc = 0.0;
        for (const SparseEntry& e : *col) acc += e.c * (dense ? g[e.k] : normal_at(path_seed, e.k));
        sup = std::max(sup, std::fabs(acc));
      }
      for (std::size_t j = 0; j < epsilons.size(); ++j)
        if (sup <= epsilons[j]) ++local[j];
    }
    const std::lock_guard<std::mutex> hold(merge_mutex);
    for (std::size_t j = 0; j < counts.size(); ++j) counts[j] += local[j];
  };

  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min<std::size_t>({hw, n_samples, 8});
  if (n_workers <= 1) {
    worker(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_samples + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n_samples, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (std::thread& th : pool) th.join();
  }

  const double mesh = grid_mesh(model);
  const double bias =
      model.modulus_K > 0.0 && mesh > 0.0
          ? model.modulus_K * std::pow(0.5 * mesh, model.modulus_alpha)
          : 0.0;
  std::vector<McEstimate> out;
  out.reserve(epsilons.size());
  for (std::size_t j = 0; j < epsilons.size(); ++j) {
    McEstimate est;
    est.epsilon = epsilons[j];
    est.p_hat = static_cast<double>(counts[j]) / static_cast<double>(n_samples);
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(n_samples));
    est.bias_note = bias;
    est.n_samples = n_samples;
    est.grid_size = model.n_points();
    est.seed = seed;
    out.push_back(est);
  }
  return out;
}

RankOneBall scaled_loud_exact(const ProcessModel& model, double epsilon) {
  if (model.kind != ProcessKind::kScaledLoud)
    throw std::invalid_argument("rank-one law requires the scaled tooth-stack kind");
  if (!(epsilon >= 0.0)) throw std::domain_error("epsilon must be nonnegative");
  RankOneBall out;
  out.m_grid = model.sup_sigma;
  const double mesh = grid_mesh(model);
  out.m_envelope = out.m_grid + model.modulus_K * std::pow(0.5 * mesh, model.modulus_alpha);
  out.p_grid = std_normal_interval(epsilon / out.m_grid);
  out.p_envelope = std_normal_interval(epsilon / out.m_envelope);
  return out;
}

IncreasingPhi log_power_phi(double beta) {
  if (!(beta > 0.5)) throw std::invalid_argument("beta must exceed 1/2");
  IncreasingPhi phi;
  phi.value = [beta](double n) { return std::pow(std::log(n + 2.0), beta); };
  phi.floor_coef = 1.0;
  phi.floor_beta = beta;
  phi.floor_from = 1.0;
  return phi;
}

ProductBound independent_product(const IncreasingPhi& phi, double epsilon, double rel_tol) {
  if (!phi.value) throw std::invalid_argument("phi has no value callback");
  if (!(phi.floor_beta > 0.5) || !(phi.floor_coef > 0.0))
    throw std::invalid_argument("phi growth floor must have positive coefficient and beta > 1/2");
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
  if (!(rel_tol > 0.0)) throw std::domain_error("rel_tol must be positive");

  const double c2e2 = phi.floor_coef * phi.floor_coef * epsilon * epsilon;
  double acc = 0.0;
  double prev = 0.0;
  double half_ago = 0.0;  // phi at n/2, for stagnation detection
  for (std::size_t n = 1;; ++n) {
    const double v = phi.value(static_cast<double>(n));
    if (!(v > 0.0)) throw std::invalid_argument("phi must be positive");
    if (n > 1 && v < prev * (1.0 - 1e-15)) throw std::invalid_argument("phi must be increasing");
    prev = v;
    if ((n & (n - 1)) == 0) {  // powers of two: floor validation + stagnation check
      const double floor_v = phi.floor_coef * std::pow(std::log(static_cast<double>(n) + 2.0), phi.floor_beta);
      if (v < floor_v * (1.0 - 1e-12))
        throw std::invalid_argument("phi violates its certified growth floor");
      if (n >= (std::size_t{1} << 16) && v <= half_ago * (1.0 + 1e-12))
        throw std::invalid_argument("product diverges to zero: phi stops increasing");
      half_ago = v;
    }
    acc += log_std_normal_interval(epsilon * v);

    if ((n & (n - 1)) == 0 || n % 8192 == 0) {
      if (static_cast<double>(n) >= phi.floor_from) {
        // Tail terms t_m = P{|g| > eps phi(m)} <= e^(-G(w_m)) with
        // G(w) = (eps c)^2 w^(2 beta) / 2 and w_m = log(m+2). The sum past n
        // is at most the integral of e^(v - G(v)) from w_n on, and convexity
        // of G caps that by e^(w - G(w)) / (G'(w) - 1) once G'(w) > 1.
        const double w = std::log(static_cast<double>(n) + 2.0);
        const double g_w = 0.5 * c2e2 * std::pow(w, 2.0 * phi.floor_beta);
        const double g_slope = phi.floor_beta * c2e2 * std::pow(w, 2.0 * phi.floor_beta - 1.0);
        if (g_slope >= 2.0 && g_w >= w + 3.0) {  // terms below e^-3: -log(1-t) <= 2t
          const double tail = 2.0 * std::exp(w - g_w) / (g_slope - 1.0);
          if (tail <= rel_tol * (1.0 + std::fabs(acc))) return {acc, n, tail};
        }
      }
    }
    if (n >= (std::size_t{1} << 24))
      throw std::runtime_error(
          "product tail failed to certify within the factor budget (epsilon too small for "
          "factor-by-factor evaluation; use the log(-log P) evaluator)");
  }
}

double sequence_log_neg_log(double beta, double epsilon) {
  if (!(beta > 0.5)) throw std::invalid_argument("beta must exceed 1/2");
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");

  // Head: exact summation of -log factors over small n.
  const std::size_t n_direct = 200000;
  double direct = 0.0;
  for (std::size_t n = 1; n <= n_direct; ++n)
    direct -= log_std_normal_interval(epsilon * std::pow(std::log(static_cast<double>(n) + 2.0), beta));
  const double log_direct = std::log(direct);

  // Tail: sum_{n > n_direct} q(eps (log(n+2))^beta) with q = -log P{|g| <= .},
  // as the integral of e^v q(eps v^beta) over v = log(n+2), all in log domain.
  const double v0 = std::log(static_cast<double>(n_direct) + 2.0);
  auto log_f = [&](double v) { return v + log_q_of(epsilon * std::pow(v, beta)); };
  const double vstar = std::pow(1.0 / (beta * epsilon * epsilon), 1.0 / (2.0 * beta - 1.0));
  const double peak_v = std::max(v0, vstar);
  const double log_peak = log_f(peak_v);
  double v_hi = std::max(2.0 * v0, 1.5 * peak_v);
  while (log_f(v_hi) > log_peak - 120.0) v_hi *= 1.5;

  const std::size_t m_steps = 100000;
  const double dv = (v_hi - v0) / static_cast<double>(m_steps);
  double running_max = -kInf;
  double running_sum = 0.0;
  for (std::size_t i = 0; i <= m_steps; ++i) {
    const double v = v0 + dv * static_cast<double>(i);
    const double l =
        log_f(v) + std::log(dv * ((i == 0 || i == m_steps) ? 0.5 : 1.0));
    if (l == -kInf) continue;
    if (l > running_max) {
      running_sum = running_sum * std::exp(running_max - l) + 1.0;
      running_max = l;
    } else {
      running_sum += std::exp(l - running_max);
    }
  }
  const double log_tail = running_max + std::log(running_sum);
  return log_sum_exp(log_direct, log_tail);
}

BallBoundPair geometric_ball_bounds(double rho, double epsilon) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("rho must lie in (0,1)");
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
  BallBoundPair out;
  out.lower = geometric_lower(rho, epsilon);
  out.upper = geometric_upper(rho, epsilon);
  return out;
}

BallBoundPair loudseries_sandwich(const LoudFamily& fam, double epsilon) {
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
  BallBoundPair out;
  // sup_t |X(t)| <= sum_k amp_k |g_k|, a geometric-weight ball.
  out.lower = geometric_lower(fam.amplitude_ratio(), epsilon);

  // Diagonal-point recursion: consecutive rescaled diagonal values differ by a
  // single fresh coefficient, so each k contributes an independent necessary
  // condition |g_k| <= (1 + period_ratio) eps / amplitude_ratio^k.
  const double scale = (1.0 + fam.period_ratio()) * epsilon;
  const double ratio = 1.0 / fam.amplitude_ratio();
  double acc = 0.0;
  std::size_t used = 0;
  double tail = kInf;
  for (std::size_t k = 1;; ++k) {
    const double z = scale * std::pow(ratio, static_cast<double>(k));
    if (z >= 2.0) {
      tail = product_log_tail_bound(z, ratio);
      if (tail <= 1e-16 * (1.0 + std::fabs(acc))) break;  // dropping factors keeps validity
    }
    acc += log_std_normal_interval(z);
    ++used;
    if (used > 200000) throw std::runtime_error("diagonal product failed to converge");
  }
  out.upper.log_value = acc;
  out.upper.n_factors_used = used;
  out.upper.tail_log_bound = tail;
  return out;
}

DoublingReport doubling_report(const std::function<double(double)>& phi_entropy, double eps_min,
                               double eps_max, std::size_t n_points) {
  if (!phi_entropy) throw std::invalid_argument("entropy function is empty");
  if (!(eps_min > 0.0) || !(eps_max > eps_min)) throw std::domain_error("need 0 < eps_min < eps_max");
  if (n_points < 2) throw std::domain_error("need at least two sample points");
  DoublingReport rep;
  rep.c1 = kInf;
  rep.c2 = -kInf;
  const double l0 = std::log(eps_min);
  const double l1 = std::log(eps_max);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double e = std::exp(l0 + (l1 - l0) * static_cast<double>(i) /
                                       static_cast<double>(n_points - 1));
    const double v = phi_entropy(e);
    const double v_half = phi_entropy(0.5 * e);
    if (!(v > 0.0) || !(v_half > 0.0)) throw std::domain_error("entropy function must be positive");
    const double r = v_half / v;
    rep.c1 = std::min(rep.c1, r);
    rep.c2 = std::max(rep.c2, r);
  }
  return rep;
}

double talagrand_lower_bound(const std::function<double(double)>& phi_entropy, double K,
                             double epsilon) {
  if (!phi_entropy) throw std::invalid_argument("entropy function is empty");
  if (!(K > 0.0)) throw std::domain_error("K must be positive");
  const double v = phi_entropy(epsilon);
  if (!(v > 0.0)) throw std::domain_error("entropy function must be positive");
  return -K * v;
}

SidakReport sidak_check(const std::vector<double>& cov, std::size_t dim, double z,
                        std::size_t n_samples, SeedSpec seed) {
  if (dim == 0 || dim > 10) throw std::invalid_argument("dimension must be in [1,10]");
  if (cov.size() != dim * dim) throw std::invalid_argument("covariance size mismatch");
  if (!(z > 0.0)) throw std::domain_error("z must be positive");
  if (n_samples == 0) throw std::domain_error("n_samples must be positive");

  double scale = 0.0;
  for (std::size_t i = 0; i < dim; ++i) scale = std::max(scale, std::fabs(cov[i * dim + i]));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i + 1; j < dim; ++j)
      if (std::fabs(cov[i * dim + j] - cov[j * dim + i]) > 1e-12 * (1.0 + scale))
        throw std::invalid_argument("covariance must be symmetric");

  // Semidefinite Cholesky (lower triangular, zero columns on zero pivots).
  std::vector<double> L(dim * dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double d = cov[j * dim + j];
    for (std::size_t k = 0; k < j; ++k) d -= L[j * dim + k] * L[j * dim + k];
    if (d < -1e-10 * (1.0 + scale))
      throw std::invalid_argument("covariance not positive semidefinite");
    if (d <= 1e-14 * (1.0 + scale)) {
      for (std::size_t i = j + 1; i < dim; ++i) {
        double num = cov[i * dim + j];
        for (std::size_t k = 0; k < j; ++k) num -= L[i * dim + k] * L[j * dim + k];
        if (std::fabs(num) > 1e-8 * (1.0 + scale))
          throw std::invalid_argument("covariance not positive semidefinite");
      }
      continue;  // L[j][j] = 0, column stays zero
    }
    L[j * dim + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < dim; ++i) {
      double num = cov[i * dim + j];
      for (std::size_t k = 0; k < j; ++k) num -= L[i * dim + k] * L[j * dim + k];
      L[i * dim + j] = num / L[j * dim + j];
    }
  }

  SidakReport rep;
  rep.product_p = 1.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(std::max(0.0, cov[j * dim + j]));
    rep.product_p *= sd == 0.0 ? 1.0 : std_normal_interval(z / sd);
  }

  std::size_t count = 0;
  std::mutex merge_mutex;
  auto worker = [&](std::size_t lo, std::size_t hi) {
    std::size_t local = 0;
    for (std::size_t r = lo; r < hi; ++r) {
      const SeedSpec path_seed{seed.master_seed, seed.stream_id + r};
      double g[10];
      for (std::size_t k = 0; k < dim; ++k) g[k] = normal_at(path_seed, k);
      bool inside = true;
      for (std::size_t i = 0; i < dim && inside; ++i) {
        double x = 0.0;
        for (std::size_t k = 0; k <= i; ++k) x += L[i * dim + k] * g[k];
        inside = std::fabs(x) <= z;
      }
      if (inside) ++local;
    }
    const std::lock_guard<std::mutex> hold(merge_mutex);
    count += local;
  };
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min<std::size_t>({hw, n_samples, 8});
  if (n_workers <= 1) {
    worker(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_samples + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n_samples, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (std::thread& th : pool) th.join();
  }

  rep.joint_p_hat = static_cast<double>(count) / static_cast<double>(n_samples);
  rep.std_err =
      std::sqrt(rep.joint_p_hat * (1.0 - rep.joint_p_hat) / static_cast<double>(n_samples));
  rep.product_le_joint = rep.product_p <= rep.joint_p_hat + 3.0 * rep.std_err;
  rep.equality_case = std::fabs(rep.product_p - rep.joint_p_hat) <= 3.0 * rep.std_err;
  return rep;
}

}  // namespace smallball
