"""Scalar fitness from peak fidelity and arrival time."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .genome import Genome


@dataclass(frozen=True)
class FitnessParams:
    a: float = 10.0
    b: float = -0.001

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("fitness parameter a must be positive")
        if not self.b <= 0:
            raise ValueError("fitness parameter b must be non-positive")


@dataclass(frozen=True)
class FitnessRecord:
    genome: Genome
    f_max: float
    t_f: float  # physical time; t_f * j_max is the reported value
    j_max: float
    score: float
    failed: bool = False

    @property
    def t_f_jmax(self) -> float:
        return self.t_f * self.j_max if self.j_max > 0 else self.t_f


def score(f_max: float, t_f: float, j_max: float, p: FitnessParams = FitnessParams()) -> float:
    """100 * exp(a (F_max - 1)) * exp(b t_f Jmax), in (0, 100]."""
    return 100.0 * math.exp(p.a * (f_max - 1.0)) * math.exp(p.b * t_f * j_max)
