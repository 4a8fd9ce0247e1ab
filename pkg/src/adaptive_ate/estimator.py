"""Adaptive AIPW score stream and the fixed-time normal-approximation interval."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from scipy.stats import norm

from .core import ContractViolation, InferenceNotReady, Interval, KahanSum, ScoreRecord


def score(y: float, a: int, f1: float, f0: float, pi1: float) -> float:
    """Doubly robust score for one subject.

    ``1[a=1](y - f1)/pi1 - 1[a=0](y - f0)/(1 - pi1) + f1 - f0``.
    With ``y, f1, f0`` in [0, 1] and ``pi1`` in [1/k, 1 - 1/k] the result
    lies in [-k, k].
    """
    if not 0.0 < pi1 < 1.0:
        raise ContractViolation(f"propensity must lie in (0, 1), got {pi1}")
    if a == 1:
        return (y - f1) / pi1 + f1 - f0
    return -(y - f0) / (1.0 - pi1) + f1 - f0


@dataclass
class EstimatorState:
    t: int = 0
    sum_h: KahanSum = field(default_factory=KahanSum)
    sum_h2: KahanSum = field(default_factory=KahanSum)
    history: list[ScoreRecord] = field(default_factory=list)
    keep_history: bool = True

    @property
    def mean(self) -> float:
        if self.t == 0:
            raise InferenceNotReady("no scores yet")
        return self.sum_h.total / self.t

    @property
    def variance(self) -> float:
        """Plug-in variance of the scores (1/T normaliser)."""
        m = self.mean
        return max(self.sum_h2.total / self.t - m * m, 0.0)

    def update(self, h: float, record: ScoreRecord | None = None) -> "EstimatorState":
        self.t += 1
        self.sum_h.add(h)
        self.sum_h2.add(h * h)
        if self.keep_history and record is not None:
            self.history.append(record)
        return self


@lru_cache(maxsize=32)
def z_quantile(alpha: float) -> float:
    return float(norm.ppf(1.0 - alpha / 2.0))


def clt_interval(state: EstimatorState, alpha: float = 0.05) -> Interval:
    """``mean +- z_{1-alpha/2} * sigma_hat / sqrt(T)``."""
    if state.t < 2:
        raise InferenceNotReady("need at least two scores")
    var = state.variance
    if var <= 0:
        raise InferenceNotReady("score variance is zero")
    half = z_quantile(alpha) * math.sqrt(var / state.t)
    m = state.mean
    return Interval(m - half, m + half)
