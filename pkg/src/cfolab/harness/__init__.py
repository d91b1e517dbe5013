"""Experiment orchestration: CLI, configs, sweeps, and SVG plots."""

from .expconfig import ExperimentConfig, parse_config
from .svgplot import plot_csvs, render_svg
from .sweeps import SWEEP_KINDS, derived_seed, file_digest, run_sweep

__all__ = [
    "ExperimentConfig",
    "SWEEP_KINDS",
    "derived_seed",
    "file_digest",
    "parse_config",
    "plot_csvs",
    "render_svg",
    "run_sweep",
]
