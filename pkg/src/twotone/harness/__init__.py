"""Configuration, scenario execution and plot-data export."""

from .config import ConfigError, RunConfig, manifest_hash, parse_config, render_manifest
from .export import SweepResult, emit_plot_data, read_sweep_csv
from .scenarios import ConvergenceError, RunReport, point_values, run_scenario, sweep_delta_h

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "RunConfig",
    "RunReport",
    "SweepResult",
    "emit_plot_data",
    "manifest_hash",
    "parse_config",
    "point_values",
    "read_sweep_csv",
    "render_manifest",
    "run_scenario",
    "sweep_delta_h",
]
