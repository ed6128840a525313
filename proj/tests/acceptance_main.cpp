// Acceptance gate: eleven numbered criteria, one line of output each.
// Every criterion is the single named check of one experiment, run at the
// built-in acceptance defaults (schedules, sample counts, tolerances all
// pinned in the library); a criterion also fails if it exceeds its wall-clock
// budget. Usage: `acceptance` runs all eleven, `acceptance --criterion N`
// runs one; exit 0 iff every line printed is a PASS.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <functional>
#include <string>

#include "smallball/lab.hpp"

namespace {

struct CriterionSpec {
  const char* experiment;
  const char* check;
  int budget_seconds;
  std::function<void(smallball::ExperimentConfig&)> tweak;
};

// The dichotomy criteria that do not need the Monte Carlo overlay shrink it
// to one path so the exact/analytic parts dominate the clock.
const CriterionSpec kCriteria[] = {
    {"entropy", "entropy_slope_band", 120, {}},
    {"dichotomy", "rank_one_linear_slope", 1, [](auto& c) { c.mc_samples = 1; }},
    {"dichotomy", "log_square_law", 1, [](auto& c) { c.mc_samples = 1; }},
    {"smallball", "mc_sandwich", 300, {}},
    {"dichotomy", "increment_envelope", 120, [](auto& c) { c.mc_samples = 1; }},
    {"smallball", "geometric_ratio_band", 1, {}},
    {"sequence", "sequence_loglog_slope", 60, {}},
    {"chaining", "chain_constant_stability", 60, {}},
    {"ultra", "ultrametric_suite", 300, {}},
    {"sidak", "sidak_product_bound", 120, {}},
    {"aperiodic", "aperiodic_increment_witness", 60, {}},
};
constexpr int kNCriteria = 11;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome run_criterion(int n) {
  const CriterionSpec& spec = kCriteria[n - 1];
  smallball::ExperimentConfig cfg = smallball::default_config(spec.experiment);
  cfg.checks = {spec.check};
  if (spec.tweak) spec.tweak(cfg);
  const smallball::RunReport rep = smallball::compute_report(cfg);
  for (const smallball::CheckResult& c : rep.checks)
    if (c.name == spec.check) return {c.pass, c.detail};
  return {false, "check did not run"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
      if (only < 1 || only > kNCriteria) {
        std::fprintf(stderr, "criterion must be 1..%d\n", kNCriteria);
        return 2;
      }
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }

  bool all_ok = true;
  for (int n = 1; n <= kNCriteria; ++n) {
    if (only != 0 && n != only) continue;
    const CriterionSpec& spec = kCriteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = run_criterion(n);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = elapsed < spec.budget_seconds;
    const bool ok = out.pass && in_budget;
    std::printf("[%s] criterion %d (%s): %s%s; elapsed %.2fs (budget %ds)\n",
                ok ? "PASS" : "FAIL", n, spec.check, out.detail.c_str(),
                in_budget ? "" : "; BUDGET EXCEEDED", elapsed, spec.budget_seconds);
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
