// Python bindings: the experiment runner surface (JSON config in, report
// object out) plus a few directly useful closed-form evaluators.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smallball/lab.hpp"
#include "smallball/loud.hpp"
#include "smallball/small_ball.hpp"

namespace py = pybind11;
using namespace smallball;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Small-deviation lab: certified bounds, Monte Carlo, experiment harness";

  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("passed", &CheckResult::pass)
      .def_readonly("detail", &CheckResult::detail)
      .def("__repr__", [](const CheckResult& c) {
        return "<CheckResult " + c.name + (c.pass ? " PASS>" : " FAIL>");
      });

  py::class_<TableData>(m, "TableData")
      .def_readonly("name", &TableData::name)
      .def_readonly("csv", &TableData::csv)
      .def("__repr__", [](const TableData& t) { return "<TableData " + t.name + ">"; });

  py::class_<RunReport>(m, "RunReport")
      .def_property_readonly("experiment",
                             [](const RunReport& r) { return r.config.experiment; })
      .def_property_readonly("out", [](const RunReport& r) { return r.config.out; })
      .def_readonly("checks", &RunReport::checks)
      .def_readonly("tables", &RunReport::tables)
      .def_readonly("artifacts", &RunReport::artifacts)
      .def_readonly("wall_seconds", &RunReport::wall_seconds)
      .def("all_pass", &RunReport::all_pass)
      .def("config_json", [](const RunReport& r) { return config_json(r.config); })
      .def("summary_json", [](const RunReport& r) { return summary_json(r); })
      .def("plot_csv", [](const RunReport& r) { return plot_csv(r); })
      .def("__repr__", [](const RunReport& r) {
        return "<RunReport " + r.config.experiment + (r.all_pass() ? " PASS>" : " FAIL>");
      });

  m.def("experiment_names", [] { return experiment_names(); },
        "Names of the eight experiments in CLI order");
  m.def("experiment_checks", [](const std::string& e) { return experiment_checks(e); },
        py::arg("experiment"), "Check names an experiment can run");
  m.def("default_config_json", [](const std::string& e) { return config_json(default_config(e)); },
        py::arg("experiment"), "Fully resolved default configuration as JSON text");
  m.def(
      "compute_report",
      [](const std::string& cfg, const std::string& experiment) {
        return compute_report(parse_config(cfg, experiment));
      },
      py::arg("config_json"), py::arg("experiment") = "",
      "Run an experiment in memory from JSON configuration text");
  m.def(
      "run_experiment",
      [](const std::string& cfg, const std::string& experiment) {
        return run_experiment(parse_config(cfg, experiment));
      },
      py::arg("config_json"), py::arg("experiment") = "",
      "Run an experiment and write manifest, tables, and summary under its out directory");

  m.def("sequence_log_neg_log", &sequence_log_neg_log, py::arg("beta"), py::arg("epsilon"),
        "log(-log P) for the independent-sequence small ball with weights (log(n+2))^beta");
  m.def(
      "geometric_ball_bounds",
      [](double rho, double epsilon) {
        const BallBoundPair b = geometric_ball_bounds(rho, epsilon);
        return py::make_tuple(b.lower.log_value, b.upper.log_value);
      },
      py::arg("rho"), py::arg("epsilon"),
      "(log lower, log upper) small-ball bounds for the geometric block sequence");
  m.def(
      "series_sandwich",
      [](int p, int A, double alpha, double epsilon) {
        const LoudFamily fam(p, A, alpha);
        const BallBoundPair b = loudseries_sandwich(fam, epsilon);
        return py::make_tuple(b.lower.log_value, b.upper.log_value);
      },
      py::arg("p"), py::arg("A"), py::arg("alpha"), py::arg("epsilon"),
      "(log lower, log upper) small-ball sandwich for the tooth-series process");
}
