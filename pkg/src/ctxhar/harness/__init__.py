"""Experiment harness: configs, comparisons, noise sweeps and the CLI."""
from .config import ExperimentConfig, SweepConfig, load_experiment, parse_experiment, sweep_seed
from .experiments import ResultsTable, prepare, run_comparison, run_noise_sweep, write_results

__all__ = [
    "ExperimentConfig",
    "ResultsTable",
    "SweepConfig",
    "load_experiment",
    "parse_experiment",
    "prepare",
    "run_comparison",
    "run_noise_sweep",
    "sweep_seed",
    "write_results",
]
