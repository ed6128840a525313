"""Small-deviation lab: certified bounds, Monte Carlo, experiment harness."""

try:
    from ._core import (
        CheckResult,
        RunReport,
        TableData,
        compute_report,
        default_config_json,
        experiment_checks,
        experiment_names,
        geometric_ball_bounds,
        run_experiment,
        sequence_log_neg_log,
        series_sandwich,
    )
except ImportError:  # in-tree runs: the extension is built as a top-level module
    from _core import (
        CheckResult,
        RunReport,
        TableData,
        compute_report,
        default_config_json,
        experiment_checks,
        experiment_names,
        geometric_ball_bounds,
        run_experiment,
        sequence_log_neg_log,
        series_sandwich,
    )

__all__ = [
    "CheckResult",
    "RunReport",
    "TableData",
    "compute_report",
    "default_config_json",
    "experiment_checks",
    "experiment_names",
    "geometric_ball_bounds",
    "run_experiment",
    "sequence_log_neg_log",
    "series_sandwich",
]
