#include "smallball/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "smallball/chaining.hpp"
#include "smallball/loud.hpp"
#include "smallball/process.hpp"
#include "smallball/rng.hpp"
#include "smallball/sieve.hpp"
#include "smallball/small_ball.hpp"
#include "smallball/ultrametric.hpp"

namespace smallball {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fixed, locale-independent number formatting: the round-trip-exact form for
// table cells, a short form for human-readable check details.
std::string fnum(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fshort(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string inum(std::uint64_t v) { return std::to_string(v); }

void add_row(std::string& csv, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) csv += ',';
    csv += cells[i];
  }
  csv += '\n';
}

std::vector<double> logspace(double first, double last, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  if (n == 1) {
    out.push_back(first);
    return out;
  }
  const double la = std::log(first);
  const double lb = std::log(last);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1)));
  return out;
}

// Integer power with a cap; returns cap + 1 once the cap is exceeded.
std::uint64_t ipow_capped(std::uint64_t base, std::uint64_t exp, std::uint64_t cap) {
  std::uint64_t v = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (v > cap / base) return cap + 1;
    v *= base;
  }
  return v;
}

[[noreturn]] void fail_field(const std::string& field, const std::string& what) {
  throw std::invalid_argument("config field '" + field + "': " + what);
}

// --- experiment metadata -------------------------------------------------

const std::map<std::string, std::vector<std::string>>& checks_map() {
  static const std::map<std::string, std::vector<std::string>> k{
      {"entropy", {"entropy_slope_band"}},
      {"smallball", {"mc_sandwich", "geometric_ratio_band"}},
      {"dichotomy", {"rank_one_linear_slope", "log_square_law", "increment_envelope"}},
      {"sequence", {"sequence_loglog_slope"}},
      {"chaining", {"chain_constant_stability"}},
      {"ultra", {"ultrametric_suite"}},
      {"sidak", {"sidak_product_bound"}},
      {"aperiodic", {"aperiodic_increment_witness"}},
  };
  return k;
}

const std::map<std::string, std::set<std::string>>& fields_map() {
  static const std::map<std::string, std::set<std::string>> k = [] {
    const std::set<std::string> common{"experiment", "seed", "out", "tolerances", "checks"};
    auto with = [&common](std::set<std::string> extra) {
      extra.insert(common.begin(), common.end());
      return extra;
    };
    std::map<std::string, std::set<std::string>> m;
    m["entropy"] = with({"p", "A", "alpha", "log2_cells", "epsilons"});
    m["smallball"] =
        with({"p", "A", "alpha", "log2_cells", "epsilons", "n_samples", "geo_epsilons", "rhos"});
    m["dichotomy"] = with({"p", "A", "alpha", "log2_cells", "increment_depth", "lag_samples",
                           "m_max", "epsilons", "x1_epsilons", "mc_epsilons", "mc_samples"});
    m["sequence"] = with({"beta", "n_max", "epsilons", "spot_epsilons", "n_samples"});
    m["chaining"] = with({"beta", "epsilons", "max_level", "u_max", "ball_depth"});
    m["ultra"] = with({"branching", "depth", "n_spaces", "eps_levels", "n_samples"});
    m["sidak"] = with({"dim", "n_matrices", "z", "n_samples"});
    m["aperiodic"] = with({"m_max"});
    return m;
  }();
  return k;
}

const std::set<std::string>& all_fields() {
  static const std::set<std::string> k = [] {
    std::set<std::string> s;
    for (const auto& [exp, fields] : fields_map()) s.insert(fields.begin(), fields.end());
    return s;
  }();
  return k;
}

const std::map<std::string, std::map<std::string, double>>& tolerance_map() {
  static const std::map<std::string, std::map<std::string, double>> k{
      {"entropy", {{"slope_min", 1.6}, {"slope_max", 2.4}}},
      {"smallball",
       {{"se_mult", 3.0},
        {"p_min", 1e-3},
        {"p_max", 0.5},
        {"min_in_range", 3.0},
        {"band_factor", 4.0}}},
      {"dichotomy", {{"x1_slope_tol", 0.02}, {"x2_slope_tol", 0.3}, {"slack_mult", 2.0}}},
      {"sequence", {{"slope_tol", 0.3}, {"se_mult", 3.0}}},
      {"chaining", {{"gap_factor", 3.0}}},
      {"ultra", {{"ratio_spread_tol", 1e-12}, {"se_mult", 3.0}}},
      {"sidak", {}},
      {"aperiodic", {}},
  };
  return k;
}

void require_experiment(const std::string& experiment) {
  if (checks_map().count(experiment)) return;
  std::string valid;
  for (const auto& name : experiment_names()) {
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  fail_field("experiment", "unknown experiment '" + experiment + "' (valid: " + valid + ")");
}

// Per-experiment starting point for scalar fields whose default differs from
// the struct initializers.
ExperimentConfig base_config(const std::string& experiment) {
  require_experiment(experiment);
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (experiment == "entropy") cfg.log2_cells = 13;
  if (experiment == "sidak") cfg.n_samples = 1000000;
  return cfg;
}

double tol(const ExperimentConfig& cfg, const std::string& key) {
  auto it = cfg.tolerances.find(key);
  if (it == cfg.tolerances.end())
    throw std::logic_error("tolerance '" + key + "' missing from resolved config");
  return it->second;
}

bool enabled(const ExperimentConfig& cfg, const std::string& check) {
  return std::find(cfg.checks.begin(), cfg.checks.end(), check) != cfg.checks.end();
}

void add_check(RunReport& rep, const std::string& name, bool pass, const std::string& detail) {
  rep.checks.push_back({name, pass, detail});
}

void add_slope(RunReport& rep, const std::string& name, const SlopeFit& fit) {
  rep.slopes.push_back({name, fit});
}

void add_table(RunReport& rep, const std::string& name, std::string csv) {
  rep.tables.push_back({name, std::move(csv)});
}

void check_schedule(const std::vector<double>& eps, const std::string& field, double lo,
                    double hi) {
  if (eps.empty()) fail_field(field, "must be a non-empty array of numbers");
  for (double e : eps)
    if (!(std::isfinite(e) && e > lo && e < hi))
      fail_field(field, "entries must lie in (" + fshort(lo) + ", " + fshort(hi) + "); got " +
                            fshort(e));
}

// --- experiment runners --------------------------------------------------

void run_entropy(const ExperimentConfig& cfg, RunReport& rep) {
  if (!enabled(cfg, "entropy_slope_band")) return;
  const LoudGridParams gp{cfg.p, cfg.A, cfg.alpha, cfg.log2_cells};
  const ProcessModel x1 = build_scaled_loud(gp);
  const ProcessModel x2 = build_loud_series(gp);
  struct Entry {
    const char* tag;
    const ProcessModel* model;
  };
  const Entry entries[] = {{"x1", &x1}, {"x2", &x2}};

  bool pass = true;
  std::size_t bracket_violations = 0;
  std::ostringstream detail;
  for (const Entry& entry : entries) {
    const FiniteMetricSpace space = entry.model->metric_space();
    const double diam = space.diameter();
    std::vector<double> eps;
    eps.reserve(cfg.epsilons.size());
    for (double f : cfg.epsilons) eps.push_back(f * diam);
    const std::vector<EntropyRow> rows = entropy_curve(space, eps);
    add_table(rep, std::string("covernum_") + entry.tag, entropy_csv(rows));

    std::vector<std::pair<double, double>> pts;
    for (const EntropyRow& r : rows)
      pts.emplace_back(1.0 / r.epsilon, static_cast<double>(r.n_cover));
    const SlopeFit fit = fit_loglog_slope(pts, 0.0, kInf);
    add_slope(rep, std::string("cover_slope_") + entry.tag, fit);
    const bool in_band = fit.slope >= tol(cfg, "slope_min") && fit.slope <= tol(cfg, "slope_max");
    pass = pass && in_band;
    detail << entry.tag << " slope " << fshort(fit.slope) << " (r2 " << fshort(fit.r_squared)
           << (in_band ? ", in " : ", OUTSIDE ") << "[" << fshort(tol(cfg, "slope_min")) << ", "
           << fshort(tol(cfg, "slope_max")) << "]); ";

    // Bracket across halving steps: a maximal packing at 2 eps cannot exceed
    // any cover at eps.
    for (std::size_t j = 1; j < rows.size(); ++j) {
      if (std::abs(rows[j - 1].epsilon - 2.0 * rows[j].epsilon) > 1e-9 * rows[j].epsilon) continue;
      if (rows[j - 1].n_packing > rows[j].n_cover) ++bracket_violations;
    }
  }
  detail << "bracket violations " << bracket_violations;
  pass = pass && bracket_violations == 0;
  add_check(rep, "entropy_slope_band", pass, detail.str());
}

void run_smallball(const ExperimentConfig& cfg, RunReport& rep) {
  const LoudFamily fam(cfg.p, cfg.A, cfg.alpha);

  if (enabled(cfg, "mc_sandwich")) {
    const LoudGridParams gp{cfg.p, cfg.A, cfg.alpha, cfg.log2_cells};
    const ProcessModel model = build_loud_series(gp);
    const std::vector<McEstimate> ests =
        mc_small_ball(model, cfg.epsilons, cfg.n_samples, SeedSpec{cfg.seed, 0});

    std::string csv = "epsilon,log_lower,log_upper,mc_p_hat,mc_std_err,grid_size,n_samples\n";
    const double se_mult = tol(cfg, "se_mult");
    std::size_t in_range = 0;
    std::size_t held = 0;
    for (const McEstimate& est : ests) {
      const BallBoundPair sw = loudseries_sandwich(fam, est.epsilon);
      add_row(csv, {fnum(est.epsilon), fnum(sw.lower.log_value), fnum(sw.upper.log_value),
                    fnum(est.p_hat), fnum(est.std_err), inum(est.grid_size),
                    inum(est.n_samples)});
      if (est.p_hat < tol(cfg, "p_min") || est.p_hat > tol(cfg, "p_max")) continue;
      ++in_range;
      const bool ok = est.p_hat >= std::exp(sw.lower.log_value) - se_mult * est.std_err &&
                      est.p_hat <= std::exp(sw.upper.log_value) + se_mult * est.std_err;
      if (ok) ++held;
    }
    add_table(rep, "smallball", std::move(csv));
    const std::size_t need = static_cast<std::size_t>(tol(cfg, "min_in_range"));
    const bool pass = in_range >= need && held == in_range;
    std::ostringstream detail;
    detail << held << "/" << in_range << " estimates in [" << fshort(tol(cfg, "p_min")) << ", "
           << fshort(tol(cfg, "p_max")) << "] sit inside the certified sandwich +/- " << se_mult
           << " SE (need " << need << " in range) at " << cfg.n_samples << " paths on a "
           << ((std::size_t{1} << cfg.log2_cells) + 1) << "-point grid";
    add_check(rep, "mc_sandwich", pass, detail.str());
  }

  if (enabled(cfg, "geometric_ratio_band")) {
    std::string csv = "rho,epsilon,log_lower,log_upper\n";
    const double band = tol(cfg, "band_factor");
    bool pass = true;
    std::ostringstream detail;
    for (double rho : cfg.rhos) {
      std::vector<double> lower_ratio;
      std::vector<double> upper_ratio;
      std::size_t order_violations = 0;
      for (double eps : cfg.geo_epsilons) {
        const BallBoundPair bb = geometric_ball_bounds(rho, eps);
        add_row(csv,
                {fnum(rho), fnum(eps), fnum(bb.lower.log_value), fnum(bb.upper.log_value)});
        const double denom = std::pow(std::log(1.0 / eps), 2.0);
        lower_ratio.push_back(-bb.lower.log_value / denom);
        upper_ratio.push_back(-bb.upper.log_value / denom);
        if (bb.lower.log_value > bb.upper.log_value) ++order_violations;
      }
      auto band_ok = [&](std::vector<double> r, double* lo, double* hi, double* med) {
        std::sort(r.begin(), r.end());
        *med = r[r.size() / 2];
        *lo = r.front();
        *hi = r.back();
        return r.front() >= *med / band && r.back() <= *med * band;
      };
      double llo, lhi, lmed, ulo, uhi, umed;
      const bool lok = band_ok(lower_ratio, &llo, &lhi, &lmed);
      const bool uok = band_ok(upper_ratio, &ulo, &uhi, &umed);
      pass = pass && lok && uok && order_violations == 0;
      detail << "rho " << fshort(rho) << ": -log bounds / log(1/eps)^2 in [" << fshort(llo) << ", "
             << fshort(lhi) << "] (lower, median " << fshort(lmed) << "), [" << fshort(ulo) << ", "
             << fshort(uhi) << "] (upper, median " << fshort(umed) << "), order violations "
             << order_violations << "; ";
    }
    detail << "allowed band: factor " << fshort(band) << " around the median";
    add_table(rep, "geometric_bounds", std::move(csv));
    add_check(rep, "geometric_ratio_band", pass, detail.str());
  }
}

void run_dichotomy(const ExperimentConfig& cfg, RunReport& rep) {
  const LoudFamily fam(cfg.p, cfg.A, cfg.alpha);
  const LoudGridParams gp{cfg.p, cfg.A, cfg.alpha, cfg.log2_cells};

  if (enabled(cfg, "rank_one_linear_slope")) {
    const ProcessModel x1 = build_scaled_loud(gp);
    std::string csv = "epsilon,p_exact,log_p\n";
    std::vector<std::pair<double, double>> pts;
    for (double eps : cfg.x1_epsilons) {
      const RankOneBall ball = scaled_loud_exact(x1, eps);
      add_row(csv, {fnum(eps), fnum(ball.p_grid), fnum(std::log(ball.p_grid))});
      pts.emplace_back(eps, ball.p_grid);
    }
    add_table(rep, "x1_exact", std::move(csv));
    const SlopeFit fit = fit_loglog_slope(pts, 0.0, kInf);
    add_slope(rep, "x1_exact_slope", fit);
    const double tolv = tol(cfg, "x1_slope_tol");
    const bool pass = std::abs(fit.slope - 1.0) <= tolv;
    add_check(rep, "rank_one_linear_slope", pass,
              "exact rank-one law: slope " + fshort(fit.slope) + " vs 1 +/- " + fshort(tolv) +
                  " (r2 " + fshort(fit.r_squared) + ") over eps [" +
                  fshort(*std::min_element(cfg.x1_epsilons.begin(), cfg.x1_epsilons.end())) +
                  ", " +
                  fshort(*std::max_element(cfg.x1_epsilons.begin(), cfg.x1_epsilons.end())) + "]");
  }

  if (enabled(cfg, "log_square_law")) {
    std::string csv = "epsilon,log_lower,log_upper\n";
    std::vector<std::pair<double, double>> lower_pts;
    std::vector<std::pair<double, double>> upper_pts;
    std::size_t order_violations = 0;
    for (double eps : cfg.epsilons) {
      const BallBoundPair sw = loudseries_sandwich(fam, eps);
      add_row(csv, {fnum(eps), fnum(sw.lower.log_value), fnum(sw.upper.log_value)});
      lower_pts.emplace_back(std::log(1.0 / eps), -sw.lower.log_value);
      upper_pts.emplace_back(std::log(1.0 / eps), -sw.upper.log_value);
      if (sw.lower.log_value > sw.upper.log_value) ++order_violations;
    }
    add_table(rep, "x2_bounds", std::move(csv));
    const SlopeFit lf = fit_loglog_slope(lower_pts, 0.0, kInf);
    const SlopeFit uf = fit_loglog_slope(upper_pts, 0.0, kInf);
    add_slope(rep, "x2_neg_log_lower_slope", lf);
    add_slope(rep, "x2_neg_log_upper_slope", uf);
    const double tolv = tol(cfg, "x2_slope_tol");
    const bool pass = std::abs(lf.slope - 2.0) <= tolv && std::abs(uf.slope - 2.0) <= tolv &&
                      order_violations == 0;
    add_check(rep, "log_square_law", pass,
              "-log bound vs log(1/eps) log-log slopes: lower " + fshort(lf.slope) + ", upper " +
                  fshort(uf.slope) + " vs 2 +/- " + fshort(tolv) + "; ordering violations " +
                  std::to_string(order_violations));
  }

  // MC overlay for the plot series; bounded by mc_samples.
  {
    const ProcessModel x2 = build_loud_series(gp);
    const std::vector<McEstimate> ests =
        mc_small_ball(x2, cfg.mc_epsilons, cfg.mc_samples, SeedSpec{cfg.seed, 1});
    std::string csv = "epsilon,log_lower,log_upper,mc_p_hat,mc_std_err,grid_size,n_samples\n";
    for (const McEstimate& est : ests) {
      const BallBoundPair sw = loudseries_sandwich(fam, est.epsilon);
      add_row(csv, {fnum(est.epsilon), fnum(sw.lower.log_value), fnum(sw.upper.log_value),
                    fnum(est.p_hat), fnum(est.std_err), inum(est.grid_size),
                    inum(est.n_samples)});
    }
    add_table(rep, "x2_mc", std::move(csv));
  }

  if (enabled(cfg, "increment_envelope")) {
    const LoudFamily::Constants cons = fam.constants();
    const double slack = tol(cfg, "slack_mult") * fam.tail_tol();
    const int e = static_cast<int>(cfg.increment_depth);
    const std::int64_t n_pts =
        static_cast<std::int64_t>(ipow_capped(static_cast<std::uint64_t>(cfg.p),
                                              cfg.increment_depth, 1u << 20)) +
        1;
    const double mesh = std::pow(static_cast<double>(cfg.p), -static_cast<double>(e));

    struct Audit {
      std::size_t checked = 0;
      std::size_t violations = 0;
      double worst = kInf;  // most negative margin first
      double at_delta = 0.0;
      void note(double margin, double delta) {
        ++checked;
        if (margin < 0.0) ++violations;
        if (margin < worst) {
          worst = margin;
          at_delta = delta;
        }
      }
    };
    Audit a_c1, a_c2, a_kappa, a_big;

    std::vector<double> fvals(static_cast<std::size_t>(n_pts));
    for (std::int64_t j = 0; j < n_pts; ++j)
      fvals[static_cast<std::size_t>(j)] = fam.f_at_padic(j, e);

    for (std::int64_t j1 = 0; j1 < n_pts; ++j1) {
      for (std::int64_t j2 = j1 + 1; j2 < n_pts; ++j2) {
        const double delta = static_cast<double>(j2 - j1) * mesh;
        const double pow_delta = std::pow(delta, cfg.alpha);
        const double d = fam.l2_increment_padic(j1, j2, e);
        a_c1.note(d - (cons.c1 * pow_delta - slack), delta);
        a_c2.note((cons.c2 * pow_delta + slack) - d, delta);
        const double fd =
            std::abs(fvals[static_cast<std::size_t>(j2)] - fvals[static_cast<std::size_t>(j1)]);
        a_big.note((cons.K_script * pow_delta + slack) - fd, delta);
      }
    }

    // Designated-lag audit: start points spread evenly over [0, 1) on the
    // finest needed p-adic grid, so sub-lag offsets are exercised too.
    for (std::size_t m = 1; m <= cfg.m_max; ++m) {
      const int em = 2 * cfg.A * (static_cast<int>(m) + 1);
      const double lag = std::pow(static_cast<double>(cfg.p), -static_cast<double>(em));
      const double pow_lag = std::pow(lag, cfg.alpha);
      int es = 0;
      std::int64_t pes = 1;
      while (pes < static_cast<std::int64_t>(cfg.lag_samples)) {
        pes *= cfg.p;
        ++es;
      }
      const int big_e = std::max(em, es);
      std::int64_t sample_step = 1;  // p^(big_e - es)
      for (int k = 0; k < big_e - es; ++k) sample_step *= cfg.p;
      std::int64_t lag_step = 1;  // p^(big_e - em)
      for (int k = 0; k < big_e - em; ++k) lag_step *= cfg.p;
      for (std::size_t j = 0; j < cfg.lag_samples; ++j) {
        const std::int64_t j1 = static_cast<std::int64_t>(j) * sample_step;
        const double fd =
            std::abs(fam.f_at_padic(j1 + lag_step, big_e) - fam.f_at_padic(j1, big_e));
        a_kappa.note(fd - (cons.kappa * pow_lag - slack), lag);
      }
    }

    std::string csv = "bound,n_checked,n_violations,worst_margin,at_delta\n";
    struct Named {
      const char* name;
      const Audit* audit;
    };
    const Named named[] = {{"lower_c1", &a_c1},
                           {"upper_c2", &a_c2},
                           {"lower_kappa", &a_kappa},
                           {"upper_K", &a_big}};
    bool pass = true;
    std::ostringstream detail;
    for (const Named& n : named) {
      add_row(csv, {n.name, inum(n.audit->checked), inum(n.audit->violations),
                    fnum(n.audit->worst), fnum(n.audit->at_delta)});
      pass = pass && n.audit->violations == 0;
      detail << n.name << " violations " << n.audit->violations << "/" << n.audit->checked
             << " (worst margin " << fshort(n.audit->worst) << " at delta "
             << fshort(n.audit->at_delta) << "); ";
    }
    detail << "slack 2x tail tolerance = " << fshort(slack);
    add_table(rep, "increment_extremes", std::move(csv));
    add_check(rep, "increment_envelope", pass, detail.str());
  }
}

void run_sequence(const ExperimentConfig& cfg, RunReport& rep) {
  if (!enabled(cfg, "sequence_loglog_slope")) return;

  std::string csv = "epsilon,log_neg_log_p\n";
  std::vector<std::pair<double, double>> pts;
  for (double eps : cfg.epsilons) {
    const double u = sequence_log_neg_log(cfg.beta, eps);
    add_row(csv, {fnum(eps), fnum(u)});
    pts.emplace_back(1.0 / eps, u);
  }
  add_table(rep, "sequence", std::move(csv));
  const SlopeFit fit = fit_loglog_slope(pts, 0.0, kInf);
  add_slope(rep, "double_log_slope", fit);
  const double target = 2.0 / (2.0 * cfg.beta - 1.0);
  const double tolv = tol(cfg, "slope_tol");
  const bool slope_ok = std::abs(fit.slope - target) <= tolv;

  const IncreasingPhi phi = log_power_phi(cfg.beta);
  const ProcessModel model = build_independent_sequence({cfg.beta, cfg.n_max, false});
  const std::vector<McEstimate> ests =
      mc_small_ball(model, cfg.spot_epsilons, cfg.n_samples, SeedSpec{cfg.seed, 2});
  std::string mc_csv = "epsilon,p_exact,tail_log_bound,mc_p_hat,mc_std_err,n_samples\n";
  const double se_mult = tol(cfg, "se_mult");
  std::size_t agree = 0;
  for (const McEstimate& est : ests) {
    const ProductBound pb = independent_product(phi, est.epsilon);
    const double p_exact = std::exp(pb.log_value);
    add_row(mc_csv, {fnum(est.epsilon), fnum(p_exact), fnum(pb.tail_log_bound), fnum(est.p_hat),
                     fnum(est.std_err), inum(est.n_samples)});
    if (std::abs(est.p_hat - p_exact) <=
        se_mult * est.std_err + p_exact * pb.tail_log_bound + 1e-12)
      ++agree;
  }
  add_table(rep, "sequence_mc", std::move(mc_csv));

  const bool pass = slope_ok && agree == ests.size();
  std::ostringstream detail;
  detail << "log(-log P) vs log(1/eps) slope " << fshort(fit.slope) << " vs " << fshort(target)
         << " +/- " << fshort(tolv) << " (r2 " << fshort(fit.r_squared) << "); MC agreement at "
         << agree << "/" << ests.size() << " spot thresholds within " << se_mult << " SE";
  add_check(rep, "sequence_loglog_slope", pass, detail.str());
}

void run_chaining(const ExperimentConfig& cfg, RunReport& rep) {
  if (!enabled(cfg, "chain_constant_stability")) return;
  const SieveModel model = make_sieve_model(cfg.beta);

  std::string levels_csv = "level,N_n,H_n\n";
  for (std::size_t n = 0; n <= cfg.max_level; ++n) {
    double cells = 1.0;
    if (n > 0) {
      try {
        cells = static_cast<double>(sieve_F_exact(model, static_cast<int>(n)));
      } catch (const std::overflow_error&) {
        cells = std::exp(sieve_log_F(model, static_cast<int>(n)));
      }
    }
    const SieveH h = sieve_h(model, static_cast<int>(n));
    add_row(levels_csv, {inum(n), fnum(cells), fnum(h.value)});
  }
  add_table(rep, "chain_levels", std::move(levels_csv));

  std::string eps_csv = "epsilon,n_eps,exponent\n";
  std::string cfit_csv = "epsilon,neg_log_p,exponent,c_fit\n";
  const double sigma = model.sigma();
  std::vector<double> gaps;
  for (double eps : cfg.epsilons) {
    const SieveLowerBound lb = sieve_lower_exponent(model, eps);
    add_row(eps_csv, {fnum(eps), inum(static_cast<std::uint64_t>(lb.level)), fnum(lb.exponent)});
    const double neg_log_p = std::exp(sequence_log_neg_log(cfg.beta, 2.0 * eps * sigma));
    const double c_fit = neg_log_p - lb.exponent;
    add_row(cfit_csv, {fnum(eps), fnum(neg_log_p), fnum(lb.exponent), fnum(c_fit)});
    gaps.push_back(std::abs(c_fit));
  }
  add_table(rep, "chain_epsilon", std::move(eps_csv));
  add_table(rep, "chain_cfit", std::move(cfit_csv));

  bool gaps_finite = true;
  double gap_min = kInf;
  double gap_max = 0.0;
  for (double g : gaps) {
    if (!std::isfinite(g)) gaps_finite = false;
    gap_min = std::min(gap_min, g);
    gap_max = std::max(gap_max, g);
  }
  const double ratio = gaps_finite && gap_min > 0.0 ? gap_max / gap_min : kInf;
  const double factor = tol(cfg, "gap_factor");
  const bool stable = gaps_finite && ratio <= factor;

  const SieveBallReport ball = sieve_ball_check(model, cfg.u_max, cfg.ball_depth);
  const bool ball_ok = ball.n_violations == 0;

  std::ostringstream detail;
  detail << "|{-log P_exact(2 eps sigma)} - exponent| spans [" << fshort(gap_min) << ", "
         << fshort(gap_max) << "] over eps in [" << fshort(cfg.epsilons.back()) << ", "
         << fshort(cfg.epsilons.front()) << "], ratio " << fshort(ratio) << " vs allowed "
         << fshort(factor) << " (stability " << (stable ? "holds" : "FAILS")
         << "); ball-structure audit: " << ball.n_violations << " violations in " << ball.n_checked
         << " checks to depth " << cfg.ball_depth;
  add_check(rep, "chain_constant_stability", stable && ball_ok, detail.str());
}

void run_ultra(const ExperimentConfig& cfg, RunReport& rep) {
  if (!enabled(cfg, "ultrametric_suite")) return;

  struct Entry {
    std::string label;
    FiniteMetricSpace space;
  };
  std::vector<Entry> entries;
  entries.push_back({"balanced", balanced_tree_space(cfg.branching, cfg.depth)});
  for (std::size_t i = 0; i < cfg.n_spaces; ++i)
    entries.push_back({"dendrogram_" + std::to_string(i),
                       random_dendrogram_space(16 + 24 * i, SeedSpec{cfg.seed, 1000 + i})});

  std::string spaces_csv =
      "space,n_leaves,depth,diameter,resolved,first_non_splitting_level,max_ratio_spread\n";
  std::string mc_csv = "space,epsilon,level,n_pairs,pair_sigma,log_bound,mc_p_hat,mc_std_err\n";
  const double spread_tol = tol(cfg, "ratio_spread_tol");
  const double se_mult = tol(cfg, "se_mult");
  bool pass = true;
  std::size_t mc_held = 0;
  std::size_t mc_total = 0;
  double worst_spread = 0.0;
  std::ostringstream problems;
  for (std::size_t idx = 0; idx < entries.size(); ++idx) {
    const Entry& entry = entries[idx];
    try {
      const UltrametricTree tree = build_ultrametric_tree(entry.space, cfg.depth);
      const ZRatioReport rr = z_ratio_report(tree);
      worst_spread = std::max(worst_spread, rr.max_spread);
      if (rr.max_spread > spread_tol) {
        pass = false;
        problems << entry.label << ": distance/scale ratio spread " << fshort(rr.max_spread)
                 << " exceeds " << fshort(spread_tol) << "; ";
      }
      add_row(spaces_csv,
              {entry.label, inum(tree.n_leaves()), inum(tree.depth()), fnum(tree.diameter),
               tree.resolved ? "1" : "0", inum(tree.first_non_splitting_level),
               fnum(rr.max_spread)});
      if (idx == 0) rep.artifacts.push_back({"ultra_tree.json", ultra_tree_json(tree)});

      for (std::size_t lv : cfg.eps_levels) {
        const double eps = tree.eps(lv);
        const ZUpperBound ub = z_small_ball_upper(tree, eps);
        const ZMcResult mc =
            z_range_mc(tree, eps, cfg.n_samples, SeedSpec{cfg.seed, 2000 + 8 * idx + lv});
        add_row(mc_csv, {entry.label, fnum(eps), inum(ub.level), inum(ub.n_pairs),
                         fnum(ub.pair_sigma), fnum(ub.log_bound), fnum(mc.p_hat),
                         fnum(mc.std_err)});
        ++mc_total;
        if (mc.p_hat <= std::exp(ub.log_bound) + se_mult * mc.std_err + 1e-9)
          ++mc_held;
        else {
          pass = false;
          problems << entry.label << " eps(" << lv << "): MC " << fshort(mc.p_hat)
                   << " above bound " << fshort(std::exp(ub.log_bound)) << " + " << se_mult
                   << " SE; ";
        }
      }
    } catch (const std::logic_error& err) {
      pass = false;
      problems << entry.label << ": invariant violation: " << err.what() << "; ";
    }
  }
  add_table(rep, "ultra_spaces", std::move(spaces_csv));
  add_table(rep, "ultra_mc", std::move(mc_csv));

  std::ostringstream detail;
  detail << entries.size()
         << " spaces built with projection/triangle/sandwich invariants verified; max "
            "distance/scale ratio spread "
         << fshort(worst_spread) << " (allowed " << fshort(spread_tol)
         << "); sibling-difference covariances exactly diagonal; MC range probability within "
            "bound at "
         << mc_held << "/" << mc_total << " runs (" << cfg.n_samples << " paths each). "
         << problems.str();
  add_check(rep, "ultrametric_suite", pass, detail.str());
}

void run_sidak(const ExperimentConfig& cfg, RunReport& rep) {
  if (!enabled(cfg, "sidak_product_bound")) return;
  const std::size_t d = cfg.dim;
  std::string csv = "matrix_id,product_p,joint_p_hat,std_err,product_le_joint,equality_case\n";

  std::vector<double> identity(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) identity[i * d + i] = 1.0;
  const SidakReport id_rep =
      sidak_check(identity, d, cfg.z, cfg.n_samples, SeedSpec{cfg.seed, 3000});
  add_row(csv, {"0", fnum(id_rep.product_p), fnum(id_rep.joint_p_hat), fnum(id_rep.std_err),
                id_rep.product_le_joint ? "1" : "0", id_rep.equality_case ? "1" : "0"});

  bool random_ok = true;
  GaussianStream gen(SeedSpec{cfg.seed, 3001});
  for (std::size_t m = 1; m <= cfg.n_matrices; ++m) {
    std::vector<double> cov(d * d);
    while (true) {
      std::vector<double> b = gen.take(d * d);
      double min_diag = kInf;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) s += b[i * d + k] * b[j * d + k];
          cov[i * d + j] = s;
        }
        min_diag = std::min(min_diag, cov[i * d + i]);
      }
      if (min_diag > 1e-9) break;
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) cov[i * d + j] /= std::sqrt(cov[i * d + i] * cov[j * d + j]);
    for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = 1.0;

    const SidakReport r = sidak_check(cov, d, cfg.z, cfg.n_samples, SeedSpec{cfg.seed, 3001 + m});
    add_row(csv, {inum(m), fnum(r.product_p), fnum(r.joint_p_hat), fnum(r.std_err),
                  r.product_le_joint ? "1" : "0", r.equality_case ? "1" : "0"});
    random_ok = random_ok && r.product_le_joint;
  }
  add_table(rep, "sidak", std::move(csv));

  const bool pass = random_ok && id_rep.product_le_joint && id_rep.equality_case;
  std::ostringstream detail;
  detail << "product of marginals <= joint MC + 3 SE for " << cfg.n_matrices
         << " random correlation matrices (dim " << d << ", z " << fshort(cfg.z) << ", "
         << cfg.n_samples << " samples each): " << (random_ok ? "all held" : "VIOLATED")
         << "; identity case equality within 3 SE: " << (id_rep.equality_case ? "yes" : "NO")
         << " (product " << fshort(id_rep.product_p) << ", joint " << fshort(id_rep.joint_p_hat)
         << ")";
  add_check(rep, "sidak_product_bound", pass, detail.str());
}

void run_aperiodic(const ExperimentConfig& cfg, RunReport& rep) {
  if (!enabled(cfg, "aperiodic_increment_witness")) return;
  const AperiodicSpec spec = default_aperiodic_spec();
  spec.validate();
  const std::vector<AperiodicWitnessRow> rows = aperiodic_witness_check(spec, cfg.m_max);
  const ProcessModel model = build_aperiodic(spec, cfg.m_max);

  std::string csv = "p,m,lag,own_term,full_dist,lower_rhs,pass\n";
  std::size_t held = 0;
  double min_margin = kInf;
  for (const AperiodicWitnessRow& r : rows) {
    add_row(csv, {std::to_string(r.p), inum(r.m), fnum(r.lag), fnum(r.own_term),
                  fnum(r.full_dist), fnum(r.lower_rhs), r.pass ? "1" : "0"});
    if (r.pass) ++held;
    if (r.lower_rhs > 0.0) min_margin = std::min(min_margin, r.own_term / r.lower_rhs);
  }
  add_table(rep, "aperiodic", std::move(csv));

  const bool pass = held == rows.size();
  std::ostringstream detail;
  detail << held << "/" << rows.size()
         << " designated-lag increment witnesses hold (min own/required ratio "
         << fshort(min_margin) << "); modulus envelope K " << fshort(model.modulus_K)
         << " alpha " << fshort(model.modulus_alpha) << ", sup sigma "
         << fshort(model.sup_sigma) << " on " << model.n_points() << " grid points";
  add_check(rep, "aperiodic_increment_witness", pass, detail.str());
}

// --- plot data -----------------------------------------------------------

std::vector<std::vector<std::string>> split_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream is(csv);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

int find_col(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

double cell_num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

const TableData* find_table(const RunReport& rep, const std::string& name) {
  for (const TableData& t : rep.tables)
    if (t.name == name) return &t;
  return nullptr;
}

// Appends one series from a table: y = y_col, optionally log-transformed,
// rows with non-finite y skipped.
void emit_series(std::string& out, const RunReport& rep, const std::string& table,
                 const std::string& series, const std::string& x_col, const std::string& y_col,
                 bool log_y = false, const std::string& filter_col = "",
                 const std::string& filter_val = "") {
  const TableData* t = find_table(rep, table);
  if (!t) return;
  const auto rows = split_csv(t->csv);
  if (rows.empty()) return;
  const int xi = find_col(rows[0], x_col);
  const int yi = find_col(rows[0], y_col);
  const int fi = filter_col.empty() ? -1 : find_col(rows[0], filter_col);
  if (xi < 0 || yi < 0) return;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (fi >= 0 && rows[r][static_cast<std::size_t>(fi)] != filter_val) continue;
    double y = cell_num(rows[r][static_cast<std::size_t>(yi)]);
    if (log_y) y = y > 0.0 ? std::log(y) : -kInf;
    if (!std::isfinite(y)) continue;
    add_row(out, {series, rows[r][static_cast<std::size_t>(xi)], fnum(y)});
  }
}

}  // namespace

// --- public API ----------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> k{"entropy",  "smallball", "dichotomy", "sequence",
                                          "chaining", "ultra",     "sidak",     "aperiodic"};
  return k;
}

const std::vector<std::string>& experiment_checks(const std::string& experiment) {
  require_experiment(experiment);
  return checks_map().at(experiment);
}

ExperimentConfig default_config(const std::string& experiment) {
  return resolve_config(base_config(experiment));
}

ExperimentConfig resolve_config(ExperimentConfig cfg) {
  require_experiment(cfg.experiment);
  const std::string& exp = cfg.experiment;

  // Schedule defaults.
  if (cfg.epsilons.empty()) {
    if (exp == "entropy")
      for (int j = 3; j <= 9; ++j) cfg.epsilons.push_back(std::ldexp(1.0, -j));
    if (exp == "smallball") cfg.epsilons = {0.15, 0.10, 0.06};
    if (exp == "dichotomy")
      for (int j = 8; j <= 40; ++j) cfg.epsilons.push_back(std::ldexp(1.0, -j));
    if (exp == "sequence") cfg.epsilons = logspace(1e-3, 1e-1, 9);
    if (exp == "chaining") cfg.epsilons = logspace(0.8, 0.08, 8);
  }
  if (exp == "dichotomy" && cfg.x1_epsilons.empty()) cfg.x1_epsilons = logspace(1e-6, 1e-2, 13);
  if (exp == "dichotomy" && cfg.mc_epsilons.empty()) cfg.mc_epsilons = {0.15, 0.10, 0.06};
  if (exp == "sequence" && cfg.spot_epsilons.empty()) cfg.spot_epsilons = {1.0, 1.4};
  if (exp == "smallball" && cfg.geo_epsilons.empty())
    for (int k = 2; k <= 12; ++k) cfg.geo_epsilons.push_back(std::pow(10.0, -k));
  if (exp == "smallball" && cfg.rhos.empty()) cfg.rhos = {0.25, 0.5};
  if (exp == "ultra" && cfg.eps_levels.empty()) cfg.eps_levels = {2, 3};

  // Tolerances: defaults overlaid with the caller's entries.
  {
    std::map<std::string, double> merged = tolerance_map().at(exp);
    for (const auto& [key, value] : cfg.tolerances) {
      if (!merged.count(key)) fail_field("tolerances." + key, "unknown tolerance");
      if (!std::isfinite(value)) fail_field("tolerances." + key, "must be finite");
      merged[key] = value;
    }
    cfg.tolerances = std::move(merged);
  }

  // Checks: default to all; otherwise validate names.
  if (cfg.checks.empty()) {
    cfg.checks = checks_map().at(exp);
  } else {
    const auto& valid = checks_map().at(exp);
    std::set<std::string> seen;
    for (const std::string& c : cfg.checks) {
      if (std::find(valid.begin(), valid.end(), c) == valid.end())
        fail_field("checks", "unknown check '" + c + "' for experiment '" + exp + "'");
      if (!seen.insert(c).second) fail_field("checks", "duplicate check '" + c + "'");
    }
  }

  if (cfg.out.empty()) cfg.out = "runs/" + exp;

  // Range validation for the fields this experiment uses.
  const std::set<std::string>& used = fields_map().at(exp);
  auto uses = [&used](const char* f) { return used.count(f) != 0; };
  if (uses("p") && cfg.p < 2) fail_field("p", "must be >= 2");
  if (uses("A") && cfg.A < 1) fail_field("A", "must be >= 1");
  if (uses("alpha") && !(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    fail_field("alpha", "must lie in (0, 1)");
  if (uses("log2_cells") && (cfg.log2_cells < 3 || cfg.log2_cells > 20))
    fail_field("log2_cells", "must lie in [3, 20]");
  if (uses("beta") && !(cfg.beta > 0.5 && cfg.beta <= 8.0))
    fail_field("beta", "must lie in (0.5, 8]");
  if (uses("n_max") && (cfg.n_max < 16 || cfg.n_max > (1u << 20)))
    fail_field("n_max", "must lie in [16, 2^20]");
  if (uses("n_samples") && cfg.n_samples == 0) fail_field("n_samples", "must be positive");
  if (uses("mc_samples") && cfg.mc_samples == 0) fail_field("mc_samples", "must be positive");

  if (exp == "entropy") {
    check_schedule(cfg.epsilons, "epsilons", 0.0, kInf);
    for (std::size_t i = 1; i < cfg.epsilons.size(); ++i)
      if (!(cfg.epsilons[i] < cfg.epsilons[i - 1]))
        fail_field("epsilons", "must be strictly descending");
  }
  if (exp == "smallball") {
    check_schedule(cfg.epsilons, "epsilons", 0.0, kInf);
    check_schedule(cfg.geo_epsilons, "geo_epsilons", 0.0, 1.0);
    check_schedule(cfg.rhos, "rhos", 0.0, 1.0);
  }
  if (exp == "dichotomy") {
    check_schedule(cfg.epsilons, "epsilons", 0.0, 1.0);
    check_schedule(cfg.x1_epsilons, "x1_epsilons", 0.0, kInf);
    check_schedule(cfg.mc_epsilons, "mc_epsilons", 0.0, kInf);
    if (cfg.increment_depth < 1) fail_field("increment_depth", "must be >= 1");
    if (ipow_capped(static_cast<std::uint64_t>(cfg.p), cfg.increment_depth, 4096) > 4096)
      fail_field("increment_depth", "p^increment_depth must not exceed 4096");
    if (cfg.lag_samples < 1 || cfg.lag_samples > (1u << 20))
      fail_field("lag_samples", "must lie in [1, 2^20]");
    if (cfg.m_max < 1 || cfg.m_max > 12) fail_field("m_max", "must lie in [1, 12]");
    {
      int es = 0;
      std::uint64_t pes = 1;
      while (pes < cfg.lag_samples) {
        pes *= static_cast<std::uint64_t>(cfg.p);
        ++es;
      }
      const int big_e = std::max(2 * cfg.A * (static_cast<int>(cfg.m_max) + 1), es);
      if (big_e * std::log(static_cast<double>(cfg.p)) > 62.0 * std::log(2.0))
        fail_field("m_max", "p^(2 A (m_max + 1)) must fit in 62 bits for exact evaluation");
    }
  }
  if (exp == "sequence") {
    check_schedule(cfg.epsilons, "epsilons", 0.0, kInf);
    check_schedule(cfg.spot_epsilons, "spot_epsilons", 0.0, kInf);
  }
  if (exp == "chaining") {
    check_schedule(cfg.epsilons, "epsilons", 0.0, 1.0);
    if (cfg.max_level < 1 || cfg.max_level > 64) fail_field("max_level", "must lie in [1, 64]");
    if (cfg.u_max < 1 || cfg.u_max > (1 << 22)) fail_field("u_max", "must lie in [1, 2^22]");
    if (cfg.ball_depth < 1 || cfg.ball_depth > 60)
      fail_field("ball_depth", "must lie in [1, 60]");
  }
  if (exp == "ultra") {
    if (cfg.branching < 2) fail_field("branching", "must be >= 2");
    if (cfg.depth < 1 || cfg.depth > 40) fail_field("depth", "must lie in [1, 40]");
    if (ipow_capped(cfg.branching, cfg.depth, 1u << 12) > (1u << 12))
      fail_field("depth", "branching^depth must not exceed 2^12 leaves");
    if (cfg.n_spaces > 16) fail_field("n_spaces", "must not exceed 16");
    if (cfg.eps_levels.empty()) fail_field("eps_levels", "must be a non-empty array");
    for (std::size_t lv : cfg.eps_levels)
      if (lv < 1 || lv > cfg.depth) fail_field("eps_levels", "entries must lie in [1, depth]");
  }
  if (exp == "sidak") {
    if (cfg.dim < 1 || cfg.dim > 10) fail_field("dim", "must lie in [1, 10]");
    if (cfg.n_matrices < 1 || cfg.n_matrices > 1000)
      fail_field("n_matrices", "must lie in [1, 1000]");
    if (!(cfg.z > 0.0) || !std::isfinite(cfg.z)) fail_field("z", "must be positive");
  }
  if (exp == "aperiodic" && (cfg.m_max < 1 || cfg.m_max > 12))
    fail_field("m_max", "must lie in [1, 12]");

  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& experiment_hint) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + err.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

  std::string experiment;
  if (j.contains("experiment")) {
    if (!j["experiment"].is_string()) fail_field("experiment", "must be a string");
    experiment = j["experiment"].get<std::string>();
  }
  if (!experiment_hint.empty()) {
    if (!experiment.empty() && experiment != experiment_hint)
      fail_field("experiment", "config file says '" + experiment +
                                   "' but the run was invoked as '" + experiment_hint + "'");
    experiment = experiment_hint;
  }
  if (experiment.empty()) fail_field("experiment", "missing");
  require_experiment(experiment);

  ExperimentConfig cfg = base_config(experiment);
  const std::set<std::string>& used = fields_map().at(experiment);

  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") continue;
    if (!all_fields().count(key)) fail_field(key, "unknown field");
    if (!used.count(key))
      fail_field(key, "not used by experiment '" + experiment + "'");

    auto as_uint = [&key, &value]() -> std::uint64_t {
      if (value.is_number_unsigned()) return value.get<std::uint64_t>();
      if (value.is_number_integer() && value.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(value.get<std::int64_t>());
      fail_field(key, "must be a nonnegative integer");
    };
    auto as_int = [&key, &value]() -> int {
      if (value.is_number_integer()) return value.get<int>();
      fail_field(key, "must be an integer");
    };
    auto as_double = [&key, &value]() -> double {
      if (value.is_number()) return value.get<double>();
      fail_field(key, "must be a number");
    };
    auto as_dvec = [&key, &value]() -> std::vector<double> {
      if (!value.is_array() || value.empty())
        fail_field(key, "must be a non-empty array of numbers");
      std::vector<double> out;
      for (const auto& entry : value) {
        if (!entry.is_number()) fail_field(key, "must be a non-empty array of numbers");
        out.push_back(entry.get<double>());
      }
      return out;
    };

    if (key == "seed") cfg.seed = as_uint();
    else if (key == "out") {
      if (!value.is_string()) fail_field(key, "must be a string");
      cfg.out = value.get<std::string>();
    } else if (key == "p") cfg.p = as_int();
    else if (key == "A") cfg.A = as_int();
    else if (key == "alpha") cfg.alpha = as_double();
    else if (key == "beta") cfg.beta = as_double();
    else if (key == "z") cfg.z = as_double();
    else if (key == "log2_cells") cfg.log2_cells = static_cast<std::size_t>(as_uint());
    else if (key == "increment_depth") cfg.increment_depth = static_cast<std::size_t>(as_uint());
    else if (key == "lag_samples") cfg.lag_samples = static_cast<std::size_t>(as_uint());
    else if (key == "m_max") cfg.m_max = static_cast<std::size_t>(as_uint());
    else if (key == "n_max") cfg.n_max = static_cast<std::size_t>(as_uint());
    else if (key == "branching") cfg.branching = static_cast<std::size_t>(as_uint());
    else if (key == "depth") cfg.depth = static_cast<std::size_t>(as_uint());
    else if (key == "n_spaces") cfg.n_spaces = static_cast<std::size_t>(as_uint());
    else if (key == "dim") cfg.dim = static_cast<std::size_t>(as_uint());
    else if (key == "n_matrices") cfg.n_matrices = static_cast<std::size_t>(as_uint());
    else if (key == "n_samples") cfg.n_samples = static_cast<std::size_t>(as_uint());
    else if (key == "mc_samples") cfg.mc_samples = static_cast<std::size_t>(as_uint());
    else if (key == "max_level") cfg.max_level = static_cast<std::size_t>(as_uint());
    else if (key == "u_max") {
      if (!value.is_number_integer() && !value.is_number_unsigned())
        fail_field(key, "must be an integer");
      cfg.u_max = value.get<std::int64_t>();
    } else if (key == "ball_depth") cfg.ball_depth = as_int();
    else if (key == "epsilons") cfg.epsilons = as_dvec();
    else if (key == "x1_epsilons") cfg.x1_epsilons = as_dvec();
    else if (key == "mc_epsilons") cfg.mc_epsilons = as_dvec();
    else if (key == "spot_epsilons") cfg.spot_epsilons = as_dvec();
    else if (key == "geo_epsilons") cfg.geo_epsilons = as_dvec();
    else if (key == "rhos") cfg.rhos = as_dvec();
    else if (key == "eps_levels") {
      if (!value.is_array() || value.empty())
        fail_field(key, "must be a non-empty array of nonnegative integers");
      cfg.eps_levels.clear();
      for (const auto& entry : value) {
        if (!entry.is_number_integer() && !entry.is_number_unsigned())
          fail_field(key, "must be a non-empty array of nonnegative integers");
        const std::int64_t lv = entry.get<std::int64_t>();
        if (lv < 0) fail_field(key, "must be a non-empty array of nonnegative integers");
        cfg.eps_levels.push_back(static_cast<std::size_t>(lv));
      }
    } else if (key == "tolerances") {
      if (!value.is_object()) fail_field(key, "must be an object of numbers");
      for (const auto& [tk, tv] : value.items()) {
        if (!tv.is_number()) fail_field("tolerances." + tk, "must be a number");
        cfg.tolerances[tk] = tv.get<double>();
      }
    } else if (key == "checks") {
      if (!value.is_array()) fail_field(key, "must be an array of check names");
      cfg.checks.clear();
      for (const auto& entry : value) {
        if (!entry.is_string()) fail_field(key, "must be an array of check names");
        cfg.checks.push_back(entry.get<std::string>());
      }
      if (cfg.checks.empty()) fail_field(key, "must name at least one check");
    } else {
      fail_field(key, "unhandled field");  // unreachable with the sets in sync
    }
  }
  return resolve_config(std::move(cfg));
}

std::string config_json(const ExperimentConfig& cfg) {
  const std::set<std::string>& used = fields_map().at(cfg.experiment);
  auto uses = [&used](const char* f) { return used.count(f) != 0; };
  json j;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out;
  j["tolerances"] = cfg.tolerances;
  j["checks"] = cfg.checks;
  if (uses("p")) j["p"] = cfg.p;
  if (uses("A")) j["A"] = cfg.A;
  if (uses("alpha")) j["alpha"] = cfg.alpha;
  if (uses("beta")) j["beta"] = cfg.beta;
  if (uses("z")) j["z"] = cfg.z;
  if (uses("log2_cells")) j["log2_cells"] = static_cast<std::uint64_t>(cfg.log2_cells);
  if (uses("increment_depth"))
    j["increment_depth"] = static_cast<std::uint64_t>(cfg.increment_depth);
  if (uses("lag_samples")) j["lag_samples"] = static_cast<std::uint64_t>(cfg.lag_samples);
  if (uses("m_max")) j["m_max"] = static_cast<std::uint64_t>(cfg.m_max);
  if (uses("n_max")) j["n_max"] = static_cast<std::uint64_t>(cfg.n_max);
  if (uses("branching")) j["branching"] = static_cast<std::uint64_t>(cfg.branching);
  if (uses("depth")) j["depth"] = static_cast<std::uint64_t>(cfg.depth);
  if (uses("n_spaces")) j["n_spaces"] = static_cast<std::uint64_t>(cfg.n_spaces);
  if (uses("dim")) j["dim"] = static_cast<std::uint64_t>(cfg.dim);
  if (uses("n_matrices")) j["n_matrices"] = static_cast<std::uint64_t>(cfg.n_matrices);
  if (uses("n_samples")) j["n_samples"] = static_cast<std::uint64_t>(cfg.n_samples);
  if (uses("mc_samples")) j["mc_samples"] = static_cast<std::uint64_t>(cfg.mc_samples);
  if (uses("max_level")) j["max_level"] = static_cast<std::uint64_t>(cfg.max_level);
  if (uses("u_max")) j["u_max"] = cfg.u_max;
  if (uses("ball_depth")) j["ball_depth"] = cfg.ball_depth;
  if (uses("epsilons")) j["epsilons"] = cfg.epsilons;
  if (uses("x1_epsilons")) j["x1_epsilons"] = cfg.x1_epsilons;
  if (uses("mc_epsilons")) j["mc_epsilons"] = cfg.mc_epsilons;
  if (uses("spot_epsilons")) j["spot_epsilons"] = cfg.spot_epsilons;
  if (uses("geo_epsilons")) j["geo_epsilons"] = cfg.geo_epsilons;
  if (uses("rhos")) j["rhos"] = cfg.rhos;
  if (uses("eps_levels")) {
    std::vector<std::uint64_t> lv(cfg.eps_levels.begin(), cfg.eps_levels.end());
    j["eps_levels"] = lv;
  }
  return j.dump(2) + "\n";
}

bool RunReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

RunReport compute_report(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = cfg;
  if (cfg.experiment == "entropy") run_entropy(cfg, rep);
  else if (cfg.experiment == "smallball") run_smallball(cfg, rep);
  else if (cfg.experiment == "dichotomy") run_dichotomy(cfg, rep);
  else if (cfg.experiment == "sequence") run_sequence(cfg, rep);
  else if (cfg.experiment == "chaining") run_chaining(cfg, rep);
  else if (cfg.experiment == "ultra") run_ultra(cfg, rep);
  else if (cfg.experiment == "sidak") run_sidak(cfg, rep);
  else if (cfg.experiment == "aperiodic") run_aperiodic(cfg, rep);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string summary_json(const RunReport& rep) {
  json j;
  j["experiment"] = rep.config.experiment;
  j["pass"] = rep.all_pass();
  j["checks"] = json::array();
  for (const CheckResult& c : rep.checks)
    j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["slopes"] = json::array();
  for (const SlopeRecord& s : rep.slopes)
    j["slopes"].push_back({{"name", s.name},
                           {"slope", s.fit.slope},
                           {"intercept", s.fit.intercept},
                           {"r_squared", s.fit.r_squared},
                           {"n_used", static_cast<std::uint64_t>(s.fit.n_used)}});
  j["tables"] = json::array();
  for (const TableData& t : rep.tables) j["tables"].push_back(t.name);
  j["artifacts"] = json::array();
  for (const TableData& a : rep.artifacts) j["artifacts"].push_back(a.name);
  return j.dump(2) + "\n";
}

namespace {
void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("failed to write " + path.string());
}
}  // namespace

void write_report(const RunReport& rep) {
  const std::filesystem::path dir(rep.config.out);
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", config_json(rep.config));
  for (const TableData& t : rep.tables) write_file(dir / (t.name + ".csv"), t.csv);
  for (const TableData& a : rep.artifacts) write_file(dir / a.name, a.csv);
  write_file(dir / "summary.json", summary_json(rep));
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  RunReport rep = compute_report(cfg);
  write_report(rep);
  return rep;
}

std::string plot_csv(const RunReport& rep) {
  std::string out = "series,x,y\n";
  const std::string& exp = rep.config.experiment;
  if (exp == "entropy") {
    std::vector<const TableData*> covers;
    for (const TableData& t : rep.tables)
      if (t.name.rfind("covernum", 0) == 0) covers.push_back(&t);
    for (const TableData* t : covers) {
      std::string prefix;
      if (covers.size() > 1 && t->name.size() > 9) prefix = t->name.substr(9) + "_";
      emit_series(out, rep, t->name, prefix + "n_cover", "epsilon", "n_cover");
      emit_series(out, rep, t->name, prefix + "n_packing", "epsilon", "n_packing");
    }
  } else if (exp == "dichotomy") {
    emit_series(out, rep, "x1_exact", "logP_X1", "epsilon", "log_p");
    emit_series(out, rep, "x2_bounds", "log_lower_X2", "epsilon", "log_lower");
    emit_series(out, rep, "x2_bounds", "log_upper_X2", "epsilon", "log_upper");
    emit_series(out, rep, "x2_mc", "mc_X2", "epsilon", "mc_p_hat", /*log_y=*/true);
  } else if (exp == "smallball") {
    emit_series(out, rep, "smallball", "log_lower", "epsilon", "log_lower");
    emit_series(out, rep, "smallball", "log_upper", "epsilon", "log_upper");
    emit_series(out, rep, "smallball", "mc_log_p", "epsilon", "mc_p_hat", /*log_y=*/true);
  } else if (exp == "sequence") {
    emit_series(out, rep, "sequence", "log_neg_log", "epsilon", "log_neg_log_p");
    emit_series(out, rep, "sequence_mc", "spot_p_exact", "epsilon", "p_exact");
    emit_series(out, rep, "sequence_mc", "spot_mc_p", "epsilon", "mc_p_hat");
  } else if (exp == "chaining") {
    emit_series(out, rep, "chain_levels", "H_n", "level", "H_n");
    emit_series(out, rep, "chain_levels", "N_n", "level", "N_n");
    emit_series(out, rep, "chain_epsilon", "exponent", "epsilon", "exponent");
    emit_series(out, rep, "chain_cfit", "c_fit", "epsilon", "c_fit");
  } else if (exp == "ultra") {
    emit_series(out, rep, "ultra_mc", "log_bound", "epsilon", "log_bound", false, "space",
                "balanced");
    emit_series(out, rep, "ultra_mc", "mc_log_p", "epsilon", "mc_p_hat", true, "space",
                "balanced");
  } else if (exp == "sidak") {
    emit_series(out, rep, "sidak", "product_p", "matrix_id", "product_p");
    emit_series(out, rep, "sidak", "joint_p_hat", "matrix_id", "joint_p_hat");
  } else if (exp == "aperiodic") {
    emit_series(out, rep, "aperiodic", "own_term", "lag", "own_term");
    emit_series(out, rep, "aperiodic", "lower_rhs", "lag", "lower_rhs");
    emit_series(out, rep, "aperiodic", "full_dist", "lag", "full_dist");
  }
  return out;
}

void emit_plot_data(const RunReport& rep, const std::string& path) {
  write_file(path, plot_csv(rep));
}

}  // namespace smallball
