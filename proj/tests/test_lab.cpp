#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "smallball/lab.hpp"

using namespace smallball;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "smallball_lab_tests" / leaf;
  fs::remove_all(dir);
  return dir;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

const CheckResult& get_check(const RunReport& rep, const std::string& name) {
  for (const CheckResult& c : rep.checks)
    if (c.name == name) return c;
  REQUIRE_MESSAGE(false, ("missing check " + name).c_str());
  static CheckResult dummy;
  return dummy;
}

const TableData& get_table(const RunReport& rep, const std::string& name) {
  for (const TableData& t : rep.tables)
    if (t.name == name) return t;
  REQUIRE_MESSAGE(false, ("missing table " + name).c_str());
  static TableData dummy;
  return dummy;
}

const SlopeRecord& get_slope(const RunReport& rep, const std::string& name) {
  for (const SlopeRecord& s : rep.slopes)
    if (s.name == name) return s;
  REQUIRE_MESSAGE(false, ("missing slope " + name).c_str());
  static SlopeRecord dummy;
  return dummy;
}

}  // namespace

TEST_CASE("experiment metadata lists the eight runners with their checks") {
  const std::vector<std::string> expect = {"entropy",  "smallball", "dichotomy", "sequence",
                                           "chaining", "ultra",     "sidak",     "aperiodic"};
  CHECK(experiment_names() == expect);
  const std::size_t sizes[] = {1, 2, 3, 1, 1, 1, 1, 1};
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(experiment_checks(expect[i]).size() == sizes[i]);
    const ExperimentConfig cfg = default_config(expect[i]);
    CHECK(cfg.experiment == expect[i]);
    CHECK(cfg.checks == experiment_checks(expect[i]));
    CHECK(cfg.out == "runs/" + expect[i]);
    CHECK(cfg.seed == 20260823u);
  }
  CHECK_THROWS_AS(experiment_checks("nope"), std::invalid_argument);
  CHECK_THROWS_AS(default_config("nope"), std::invalid_argument);
}

TEST_CASE("default schedules and per-experiment scalar overrides") {
  const ExperimentConfig ent = default_config("entropy");
  CHECK(ent.log2_cells == 13);
  CHECK(ent.epsilons.size() == 7);
  CHECK(ent.epsilons.front() == doctest::Approx(0.125));
  CHECK(ent.epsilons.back() == doctest::Approx(1.0 / 512.0));

  const ExperimentConfig sb = default_config("smallball");
  CHECK(sb.log2_cells == 12);
  CHECK(sb.epsilons == std::vector<double>{0.15, 0.10, 0.06});
  CHECK(sb.geo_epsilons.size() == 11);
  CHECK(sb.rhos == std::vector<double>{0.25, 0.5});

  const ExperimentConfig di = default_config("dichotomy");
  CHECK(di.epsilons.size() == 33);
  CHECK(di.x1_epsilons.size() == 13);
  CHECK(di.mc_epsilons.size() == 3);

  const ExperimentConfig seq = default_config("sequence");
  CHECK(seq.epsilons.size() == 9);
  CHECK(seq.spot_epsilons == std::vector<double>{1.0, 1.4});

  const ExperimentConfig ch = default_config("chaining");
  CHECK(ch.epsilons.size() == 8);
  CHECK(ch.epsilons.front() == doctest::Approx(0.8));
  CHECK(ch.epsilons.back() == doctest::Approx(0.08));

  const ExperimentConfig ul = default_config("ultra");
  CHECK(ul.eps_levels == std::vector<std::size_t>{2, 3});

  const ExperimentConfig si = default_config("sidak");
  CHECK(si.n_samples == 1000000);
  CHECK(si.tolerances.empty());

  CHECK(default_config("aperiodic").m_max == 5);
  CHECK(ent.tolerances.at("slope_min") == doctest::Approx(1.6));
  CHECK(sb.tolerances.at("band_factor") == doctest::Approx(4.0));
}

TEST_CASE("parse_config rejects malformed input with the offending field named") {
  auto message_of = [](const std::string& text, const std::string& hint = "") {
    try {
      parse_config(text, hint);
    } catch (const std::invalid_argument& err) {
      return std::string(err.what());
    }
    return std::string("<no throw>");
  };

  CHECK(message_of("{") .find("invalid JSON") != std::string::npos);
  CHECK(message_of("[1,2]").find("top level") != std::string::npos);
  CHECK(message_of("{}").find("'experiment': missing") != std::string::npos);
  CHECK(message_of(R"({"experiment":"warp"})").find("unknown experiment") != std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","bogus":1})").find("'bogus': unknown") !=
        std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","beta":1.0})")
            .find("not used by experiment 'entropy'") != std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","alpha":"x"})").find("'alpha'") !=
        std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","epsilons":[]})")
            .find("'epsilons': must be a non-empty array") != std::string::npos);
  CHECK(message_of(R"({"experiment":"sidak"})", "entropy").find("invoked as 'entropy'") !=
        std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","tolerances":{"wombat":1}})")
            .find("tolerances.wombat") != std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","checks":["nope"]})")
            .find("unknown check 'nope'") != std::string::npos);
  CHECK(message_of(R"({"experiment":"entropy","epsilons":[0.5,0.6]})")
            .find("strictly descending") != std::string::npos);
  CHECK(message_of(R"({"experiment":"chaining","epsilons":[1.5]})").find("'epsilons'") !=
        std::string::npos);
  CHECK(message_of(R"({"experiment":"ultra","depth":30})").find("branching^depth") !=
        std::string::npos);
  CHECK(message_of(R"({"experiment":"sidak","dim":11})").find("'dim'") != std::string::npos);

  // Hint alone selects the experiment.
  const ExperimentConfig cfg = parse_config(R"({"seed": 7})", "aperiodic");
  CHECK(cfg.experiment == "aperiodic");
  CHECK(cfg.seed == 7u);
}

TEST_CASE("manifest JSON round-trips through parse_config") {
  for (const std::string& name : experiment_names()) {
    ExperimentConfig cfg = default_config(name);
    cfg.seed = 12345;
    const std::string text = config_json(cfg);
    const ExperimentConfig back = parse_config(text);
    CHECK(config_json(back) == text);
    CHECK(back.seed == 12345u);
    CHECK(back.checks == cfg.checks);
  }
}

TEST_CASE("aperiodic run writes deterministic files and passes") {
  ExperimentConfig cfg = default_config("aperiodic");
  cfg.m_max = 3;
  cfg.out = fresh_dir("aperiodic_a").string();
  const RunReport rep = run_experiment(cfg);
  CHECK(rep.all_pass());
  CHECK(rep.checks.size() == 1);
  CHECK(get_check(rep, "aperiodic_increment_witness").pass);
  const TableData& table = get_table(rep, "aperiodic");
  CHECK(count_lines(table.csv) == 1 + 5 * 3);  // five primes, m = 1..3

  const fs::path dir(cfg.out);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "aperiodic.csv"));
  CHECK(slurp(dir / "aperiodic.csv") == table.csv);
  const nlohmann::json summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["pass"] == true);
  CHECK(summary["experiment"] == "aperiodic");
  const nlohmann::json manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["m_max"] == 3);

  ExperimentConfig cfg2 = cfg;
  cfg2.out = fresh_dir("aperiodic_b").string();
  run_experiment(cfg2);
  CHECK(slurp(dir / "aperiodic.csv") == slurp(fs::path(cfg2.out) / "aperiodic.csv"));
  CHECK(slurp(dir / "summary.json") == slurp(fs::path(cfg2.out) / "summary.json"));
}

TEST_CASE("sidak run holds the product bound on random correlation matrices") {
  ExperimentConfig cfg = default_config("sidak");
  cfg.n_matrices = 3;
  cfg.n_samples = 20000;
  cfg.out = fresh_dir("sidak").string();
  const RunReport rep = run_experiment(cfg);
  CHECK(get_check(rep, "sidak_product_bound").pass);
  const TableData& table = get_table(rep, "sidak");
  CHECK(count_lines(table.csv) == 1 + 1 + 3);  // header, identity, three random draws
  CHECK(table.csv.rfind("matrix_id,product_p,joint_p_hat,std_err,product_le_joint,equality_case\n",
                        0) == 0);
}

TEST_CASE("smallball run emits the pinned table schema and certifies the sandwich") {
  ExperimentConfig cfg = default_config("smallball");
  cfg.log2_cells = 8;
  cfg.n_samples = 4000;
  cfg.out = fresh_dir("smallball").string();
  const RunReport rep = run_experiment(cfg);
  const TableData& table = get_table(rep, "smallball");
  CHECK(table.csv.rfind("epsilon,log_lower,log_upper,mc_p_hat,mc_std_err,grid_size,n_samples\n",
                        0) == 0);
  CHECK(count_lines(table.csv) == 1 + cfg.epsilons.size());
  CHECK(get_check(rep, "mc_sandwich").pass);
  CHECK(get_check(rep, "geometric_ratio_band").pass);
  CHECK(count_lines(get_table(rep, "geometric_bounds").csv) == 1 + 2 * 11);

  const std::string plot = plot_csv(rep);
  CHECK(plot.rfind("series,x,y\n", 0) == 0);
  CHECK(plot.find("log_lower,") != std::string::npos);
  CHECK(plot.find("mc_log_p,") != std::string::npos);
}

TEST_CASE("entropy run reports both processes with a clean covering/packing bracket") {
  ExperimentConfig cfg = default_config("entropy");
  cfg.log2_cells = 8;
  cfg.epsilons = {0.125, 0.0625, 0.03125};
  cfg.out = fresh_dir("entropy").string();
  const RunReport rep = run_experiment(cfg);
  CHECK(count_lines(get_table(rep, "covernum_x1").csv) == 4);
  CHECK(count_lines(get_table(rep, "covernum_x2").csv) == 4);
  get_slope(rep, "cover_slope_x1");
  get_slope(rep, "cover_slope_x2");
  const CheckResult& check = get_check(rep, "entropy_slope_band");
  CHECK(check.detail.find("bracket violations 0") != std::string::npos);

  const std::string plot = plot_csv(rep);
  CHECK(plot.find("x1_n_cover,") != std::string::npos);
  CHECK(plot.find("x2_n_packing,") != std::string::npos);
}

TEST_CASE("dichotomy run separates the linear law from the squared-log law") {
  ExperimentConfig cfg = default_config("dichotomy");
  cfg.log2_cells = 8;
  cfg.increment_depth = 6;
  cfg.lag_samples = 64;
  cfg.mc_samples = 2000;
  cfg.out = fresh_dir("dichotomy").string();
  const RunReport rep = run_experiment(cfg);
  CHECK(get_check(rep, "rank_one_linear_slope").pass);
  CHECK(get_check(rep, "log_square_law").pass);
  CHECK(get_slope(rep, "x1_exact_slope").fit.slope == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(get_slope(rep, "x2_neg_log_lower_slope").fit.slope - 2.0) < 0.3);
  CHECK(count_lines(get_table(rep, "increment_extremes").csv) == 5);
  CHECK(count_lines(get_table(rep, "x2_mc").csv) == 1 + cfg.mc_epsilons.size());

  const std::string plot = plot_csv(rep);
  CHECK(plot.find("logP_X1,") != std::string::npos);
  CHECK(plot.find("log_lower_X2,") != std::string::npos);
  CHECK(plot.find("log_upper_X2,") != std::string::npos);
  CHECK(plot.find("mc_X2,") != std::string::npos);
}

TEST_CASE("sequence run recovers the double-log slope and the exact spot values") {
  ExperimentConfig cfg = default_config("sequence");
  cfg.epsilons = {1e-3, 1e-2, 1e-1};
  cfg.spot_epsilons = {1.0};
  cfg.n_samples = 20000;
  cfg.out = fresh_dir("sequence").string();
  const RunReport rep = run_experiment(cfg);
  CHECK(get_check(rep, "sequence_loglog_slope").pass);
  CHECK(get_slope(rep, "double_log_slope").fit.slope == doctest::Approx(2.0).epsilon(0.15));
  CHECK(count_lines(get_table(rep, "sequence_mc").csv) == 2);
}

TEST_CASE("chaining run reports the honest instability of the chain constant") {
  ExperimentConfig cfg = default_config("chaining");
  cfg.epsilons = {0.8, 0.3, 0.08};
  cfg.max_level = 12;
  cfg.out = fresh_dir("chaining").string();
  const RunReport rep = run_experiment(cfg);
  const CheckResult& check = get_check(rep, "chain_constant_stability");
  CHECK_FALSE(check.pass);  // the gap between exact exponent and sieve bound is unbounded
  CHECK(check.detail.find("FAILS") != std::string::npos);
  CHECK(check.detail.find("0 violations") != std::string::npos);

  const TableData& levels = get_table(rep, "chain_levels");
  CHECK(count_lines(levels.csv) == 1 + 13);
  CHECK(levels.csv.find("2,7,") != std::string::npos);  // N_2 = 3^2 - 2 = 7
  CHECK(get_table(rep, "chain_epsilon").csv.find("inf") != std::string::npos);
}

TEST_CASE("ultra run verifies tree invariants and the sibling-pair bound") {
  ExperimentConfig cfg = default_config("ultra");
  cfg.branching = 3;
  cfg.depth = 4;
  cfg.n_spaces = 2;
  cfg.n_samples = 3000;
  cfg.out = fresh_dir("ultra").string();
  const RunReport rep = run_experiment(cfg);
  CHECK(get_check(rep, "ultrametric_suite").pass);
  CHECK(count_lines(get_table(rep, "ultra_spaces").csv) == 1 + 3);
  CHECK(count_lines(get_table(rep, "ultra_mc").csv) == 1 + 3 * 2);
  REQUIRE(rep.artifacts.size() == 1);
  CHECK(rep.artifacts[0].name == "ultra_tree.json");
  const nlohmann::json tree = nlohmann::json::parse(rep.artifacts[0].csv);
  CHECK(tree.contains("levels"));
  CHECK(fs::exists(fs::path(cfg.out) / "ultra_tree.json"));
}

TEST_CASE("plot data for an empty report is just the header") {
  RunReport rep;
  rep.config.experiment = "entropy";
  CHECK(plot_csv(rep) == "series,x,y\n");
}
