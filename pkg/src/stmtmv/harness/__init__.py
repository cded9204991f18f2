"""Data ingestion, planted synthetic data, metrics and experiment runs."""

from .config import DataPaths, ExperimentConfig
from .experiment import ResultTable, run_experiment
from .metrics import accuracy, rmse
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "DataPaths",
    "ExperimentConfig",
    "ResultTable",
    "SyntheticSpec",
    "accuracy",
    "generate_synthetic",
    "rmse",
    "run_experiment",
]
