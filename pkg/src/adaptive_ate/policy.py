"""Treatment assignment: variance-optimal allocation, propensity truncation, arm draws."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigError, ContractViolation, TruncationSchedule


@dataclass(frozen=True)
class PolicyDecision:
    pi1_raw: float
    pi1: float
    k: float


def aipw_policy(v1: float, v0: float) -> float:
    """Probability of arm 1 minimising the asymptotic variance: sqrt(v1) / (sqrt(v1) + sqrt(v0))."""
    if not (v1 > 0 and v0 > 0):
        raise ContractViolation(f"variances must be positive, got v1={v1}, v0={v0}")
    s1, s0 = math.sqrt(v1), math.sqrt(v0)
    return s1 / (s1 + s0)


def truncate(pi_raw: float, k: float) -> float:
    """Clamp a propensity into [1/k, 1 - 1/k]."""
    if not k >= 2:
        raise ConfigError(f"truncation level must be >= 2, got {k}")
    return min(max(pi_raw, 1.0 / k), 1.0 - 1.0 / k)


def next_k(schedule: TruncationSchedule, k_prev: float | None, t: int) -> float:
    """Truncation level for subject ``t`` given the previous level."""
    if t < 1:
        raise ContractViolation(f"t must be >= 1, got {t}")
    if t == 1 or schedule.kind == "constant" or k_prev is None:
        return schedule.k1
    return k_prev / schedule.decay


def sample_arm(pi1: float, rng: np.random.Generator) -> int:
    return int(rng.random() < pi1)


class A2IPWPolicy:
    """Plug-in variance-optimal policy fed by a split regressor, truncated at k_t.

    The first ``warmup`` subjects are assigned with probability 1/2.
    """

    def __init__(self, regressor, warmup: int = 100):
        self.regressor = regressor
        self.warmup = warmup

    def raw(self, x, t: int) -> float:
        if t <= self.warmup:
            return 0.5
        v1, v0 = self.regressor.variances_for_policy(x, t)
        return aipw_policy(v1, v0)

    def decide(self, x, t: int, k: float) -> PolicyDecision:
        pi_raw = self.raw(x, t)
        return PolicyDecision(pi_raw, truncate(pi_raw, k), k)


class OracleAIPWPolicy(A2IPWPolicy):
    """Variance-optimal policy computed from the true conditional variances."""

    def __init__(self, variance: Callable[[int, np.ndarray], float], warmup: int = 0):
        super().__init__(regressor=None, warmup=warmup)
        self.variance = variance

    def raw(self, x, t: int) -> float:
        if t <= self.warmup:
            return 0.5
        x = np.asarray(x, dtype=float)
        return aipw_policy(self.variance(1, x), self.variance(0, x))


class FixedPolicy:
    def __init__(self, p: float = 0.5):
        if not 0 < p < 1:
            raise ConfigError(f"fixed policy probability must lie in (0, 1), got {p}")
        self.p = p

    def decide(self, x, t: int, k: float) -> PolicyDecision:
        return PolicyDecision(self.p, truncate(self.p, k), k)


def decide(x, t: int, regressor, k: float, warmup: int = 100) -> PolicyDecision:
    """One-shot A2IPW decision for subject ``t`` at truncation level ``k``."""
    return A2IPWPolicy(regressor, warmup).decide(x, t, k)
