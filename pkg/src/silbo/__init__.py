"""High-dimensional Bayesian optimization on an iteratively learned linear
embedding, with semi-supervised sliced-inverse-regression embedding updates
and two strategies for keeping the surrogate consistent across updates."""

from .acquisition import AcquisitionSpec
from .bench import SyntheticObjective, make_benchmark
from .mapping import SearchBox, TrainingSet
from .optimizer import (
    METHODS,
    OptimizerConfig,
    RunRecord,
    run_method,
    run_random_embedding_bo,
    run_random_search,
    run_silbo,
)
from .semisir import EmbeddingModel, solve_embedding

__all__ = [
    "AcquisitionSpec",
    "EmbeddingModel",
    "METHODS",
    "OptimizerConfig",
    "RunRecord",
    "SearchBox",
    "SyntheticObjective",
    "TrainingSet",
    "make_benchmark",
    "run_method",
    "run_random_embedding_bo",
    "run_random_search",
    "run_silbo",
    "solve_embedding",
]

__version__ = "0.1.0"
