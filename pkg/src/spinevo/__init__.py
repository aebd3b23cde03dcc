"""Genetic optimisation of spin-network couplings for quantum information tasks."""

__version__ = "0.1.0"

from .engine import GaConfig, GenerationLog, evaluate, random_search, run_ga
from .fitness import FitnessParams, FitnessRecord, score
from .genome import Genome, parse, round_couplings, serialize

__all__ = [
    "GaConfig",
    "GenerationLog",
    "FitnessParams",
    "FitnessRecord",
    "Genome",
    "evaluate",
    "parse",
    "random_search",
    "round_couplings",
    "run_ga",
    "score",
    "serialize",
]
