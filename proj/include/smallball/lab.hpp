#pragma once
// Experiment harness: JSON-configured runs of the library's scaling studies,
// each producing CSV tables, a manifest echoing the fully resolved
// configuration, a machine-readable summary with named pass/fail checks, and
// long-format plot data. Given the same configuration, every numeric output
// is byte-identical across runs (fixed seeds, single-threaded evaluation,
// fixed number formatting); wall-clock time is therefore reported in memory
// only and never written to disk.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smallball/cover.hpp"

namespace smallball {

// The eight runnable experiments, in CLI order:
//   entropy    covering/packing growth of the two saw-tooth processes
//   smallball  MC estimates vs certified sandwich bounds; geometric-weight
//              ratio stability
//   dichotomy  rank-one linear law vs series log-square law, with the
//              exhaustive increment-envelope audit
//   sequence   independent-sequence double-log scaling plus MC spot checks
//   chaining   sieve level tables, lower-bound exponents, and the
//              bound-vs-exact gap audit
//   ultra      ultrametric tree process: structure, bounds, MC comparison
//   sidak      product-vs-joint orthant comparison for Gaussian vectors
//   aperiodic  per-component increment witnesses of the coprime stack
const std::vector<std::string>& experiment_names();

// Named checks evaluated by one experiment (the full list; a config may
// enable a subset). Unknown experiment -> std::invalid_argument.
const std::vector<std::string>& experiment_checks(const std::string& experiment);

struct ExperimentConfig {
  std::string experiment;

  // Saw-tooth family (entropy, smallball, dichotomy).
  int p = 2;
  int A = 2;
  double alpha = 0.5;
  // Grid 2^log2_cells + 1 equispaced points (entropy, smallball, dichotomy).
  std::size_t log2_cells = 12;

  // Dichotomy increment audit: exact p-adic grid j * p^-increment_depth and
  // the number of consecutive pairs sampled at each designated lag.
  std::size_t increment_depth = 10;
  std::size_t lag_samples = 4096;

  // Weight exponent of phi(n) = (log(n+2))^beta (sequence, chaining).
  double beta = 1.0;
  std::size_t n_max = 4096;  // sequence truncation for the MC model

  // Ultrametric instance: balanced tree shape, extra random dendrogram
  // spaces, and the tree levels whose scale eps(level) is MC-tested.
  std::size_t branching = 3;
  std::size_t depth = 5;
  std::size_t n_spaces = 10;
  std::vector<std::size_t> eps_levels;

  // Product-vs-joint comparison.
  std::size_t dim = 3;
  std::size_t n_matrices = 20;
  double z = 1.0;

  std::size_t m_max = 5;  // aperiodic designated-lag depth

  // Epsilon schedules. `epsilons` is the main schedule (for entropy it is
  // relative: each entry is multiplied by the process diameter); the others
  // are experiment-specific auxiliaries.
  std::vector<double> epsilons;
  std::vector<double> x1_epsilons;    // dichotomy: rank-one exact-law curve
  std::vector<double> mc_epsilons;    // dichotomy: MC overlay thresholds
  std::vector<double> spot_epsilons;  // sequence: MC agreement thresholds
  std::vector<double> geo_epsilons;   // smallball: geometric-weight schedule
  std::vector<double> rhos;           // smallball: geometric weight ratios

  std::size_t n_samples = 100000;  // main MC path count
  std::size_t mc_samples = 20000;  // dichotomy MC overlay path count

  // Chaining tables and audits.
  std::size_t max_level = 12;   // levels 0..max_level in the level table
  std::int64_t u_max = 65536;   // index width of the exhaustive ball audit
  int ball_depth = 20;          // level depth of the exhaustive ball audit

  std::uint64_t seed = 20260823;
  std::string out;  // output directory; resolved to runs/<experiment>

  // Check thresholds (slope bands, error multipliers); keys are
  // experiment-specific and unknown keys are rejected.
  std::map<std::string, double> tolerances;
  // Enabled checks; resolved to the experiment's full list when empty. Only
  // enabled checks are computed, reported, and counted toward the exit
  // status.
  std::vector<std::string> checks;
};

// Returns the fully resolved configuration for an experiment: schedules,
// tolerances, checks, and output directory filled with their defaults.
// Unknown experiment -> std::invalid_argument.
ExperimentConfig default_config(const std::string& experiment);

// Fills every empty schedule/tolerance/check slot of `partial` with the
// experiment defaults and validates ranges; throws std::invalid_argument
// naming the offending field.
ExperimentConfig resolve_config(ExperimentConfig partial);

// Parses a JSON object into a resolved configuration. Only fields used by
// the experiment are accepted; unknown fields, wrong types, empty schedules,
// and out-of-range values throw std::invalid_argument naming the field.
// experiment_hint (e.g. the CLI subcommand) supplies or cross-checks the
// "experiment" entry: a conflicting entry is an error.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& experiment_hint = "");

// The resolved configuration rendered as pretty JSON (the manifest body);
// parse_config(config_json(cfg)) reproduces cfg.
std::string config_json(const ExperimentConfig& cfg);

struct TableData {
  std::string name;  // file stem: written to <out>/<name>.csv
  std::string csv;   // full CSV content including the header line
};

struct SlopeRecord {
  std::string name;
  SlopeFit fit;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // the numbers the verdict was based on
};

struct RunReport {
  ExperimentConfig config;  // resolved
  std::vector<TableData> tables;
  // Non-CSV companion files (e.g. the ultrametric tree serialization);
  // written verbatim, name includes the extension.
  std::vector<TableData> artifacts;
  std::vector<SlopeRecord> slopes;
  std::vector<CheckResult> checks;
  double wall_seconds = 0.0;  // in-memory only; never serialized
  bool all_pass() const;
};

// Runs the experiment in memory: tables, slope fits, and enabled checks.
// Unresolved configurations are resolved first (idempotent on resolved ones).
RunReport compute_report(const ExperimentConfig& cfg);

// compute_report plus file output under cfg.out: manifest.json (resolved
// config), one <table>.csv per table, summary.json (checks, slopes, table
// list, overall pass flag). Creates the directory if needed.
RunReport run_experiment(const ExperimentConfig& cfg);

// The file-writing half of run_experiment, reusable on a computed report.
void write_report(const RunReport& report);

// summary.json body: experiment, overall pass, per-check results, slope
// fits, table names.
std::string summary_json(const RunReport& report);

// Long-format plot data "series,x,y". Entropy reports emit cover/packing
// series per process; dichotomy reports emit logP_X1, log_lower_X2,
// log_upper_X2, and mc_X2; the other experiments emit their natural
// series. A report with no tables yields only the header line.
std::string plot_csv(const RunReport& report);

// Writes plot_csv to the given path (parent directory must exist).
void emit_plot_data(const RunReport& report, const std::string& path);

}  // namespace smallball
