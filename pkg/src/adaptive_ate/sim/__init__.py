"""Simulation harness: data-generating processes, experiment loop, aggregation."""
from .aggregate import AggregateResult, aggregate
from .config import ExperimentConfig, config_from_mapping, load_config
from .dgp import BernoulliDGP, BoundedDGP, TruncationStudyDGP, make_dgp
from .experiment import InferenceEngine, Trajectory, run_experiment, run_many

__all__ = [
    "AggregateResult", "aggregate", "ExperimentConfig", "config_from_mapping", "load_config",
    "BernoulliDGP", "BoundedDGP", "TruncationStudyDGP", "make_dgp",
    "InferenceEngine", "Trajectory", "run_experiment", "run_many",
]
