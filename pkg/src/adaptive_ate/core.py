"""Shared value types, error classes and small deterministic helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np


class ContractViolation(ValueError):
    """An operation was called outside its documented domain."""


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


class DataValidationError(ValueError):
    """Input data that cannot be accepted (out of range, malformed rows)."""


class InferenceNotReady(RuntimeError):
    """Not enough data to form the requested interval yet."""


@dataclass(frozen=True)
class Observation:
    t: int
    x: np.ndarray
    a: int
    y: float

    def __post_init__(self):
        if self.t < 1:
            raise ContractViolation(f"observation index must be >= 1, got {self.t}")
        if self.a not in (0, 1):
            raise ContractViolation(f"arm must be 0 or 1, got {self.a}")


@dataclass(frozen=True)
class OutcomeRange:
    """Known bounds of the raw outcome, used to map outcomes onto [0, 1]."""

    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise ConfigError(f"outcome range needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def scale(self) -> float:
        return self.hi - self.lo

    def contains(self, y: float, tol: float = 1e-12) -> bool:
        return self.lo - tol * self.scale <= y <= self.hi + tol * self.scale


def rescale(y: float, rng_: OutcomeRange) -> float:
    """Map ``y`` from ``[lo, hi]`` onto ``[0, 1]``."""
    if not rng_.contains(y):
        raise DataValidationError(f"outcome {y!r} outside declared range [{rng_.lo}, {rng_.hi}]")
    return min(max((y - rng_.lo) / rng_.scale, 0.0), 1.0)


def unrescale(u: float, rng_: OutcomeRange) -> float:
    """Inverse of :func:`rescale` for outcome values."""
    return rng_.lo + u * rng_.scale


def effect_to_raw(theta: float, rng_: OutcomeRange) -> float:
    """Map a treatment effect (difference of means) from [0,1] units back to raw units.

    Differences are invariant to the offset, so only the slope applies.
    """
    return theta * rng_.scale


def effect_to_unit(theta: float, rng_: OutcomeRange) -> float:
    return theta / rng_.scale


@dataclass(frozen=True)
class TruncationSchedule:
    """Propensity clamp levels k_t; propensities are forced into [1/k_t, 1 - 1/k_t].

    ``geometric`` grows as ``k_t = k_{t-1} / decay`` starting from ``k1``;
    ``constant`` keeps ``k1`` forever.
    """

    kind: Literal["constant", "geometric"] = "geometric"
    k1: float = 2.0
    decay: float = 0.999

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.k1 >= 2:
            raise ConfigError(f"k1 must be >= 2, got {self.k1}")
        if not 0 < self.decay <= 1:
            raise ConfigError(f"decay must lie in (0, 1], got {self.decay}")

    @classmethod
    def from_pi_min(cls, pi_min: float) -> "TruncationSchedule":
        if not 0 < pi_min <= 0.5:
            raise ConfigError(f"pi_min must lie in (0, 0.5], got {pi_min}")
        return cls(kind="constant", k1=1.0 / pi_min, decay=1.0)

    def k_closed_form(self, t: int) -> float:
        if self.kind == "constant":
            return self.k1
        return self.k1 / self.decay ** (t - 1)


@dataclass(frozen=True)
class ScoreRecord:
    t: int
    h: float
    pi1: float
    k: float
    f1_hat: float
    f0_hat: float


@dataclass(frozen=True)
class Interval:
    lower: float = -math.inf
    upper: float = math.inf
    empty: bool = False

    @property
    def width(self) -> float:
        if self.empty:
            return 0.0
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return (not self.empty) and self.lower <= value <= self.upper

    def scaled(self, factor: float) -> "Interval":
        """Interval for ``factor * theta`` (factor > 0)."""
        return Interval(self.lower * factor, self.upper * factor, self.empty)


FULL_LINE = Interval()


def seeded_rng(seed: int, stream: int = 0, *substream: int) -> np.random.Generator:
    """PCG64 generator keyed on ``(seed, stream, *substream)``.

    Distinct keys give statistically independent streams (``SeedSequence``
    spawn keys); equal keys reproduce the same draws bit for bit.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), *map(int, substream)))
    return np.random.Generator(np.random.PCG64(ss))


class KahanSum:
    """Compensated running sum."""

    __slots__ = ("total", "_c")

    def __init__(self):
        self.total = 0.0
        self._c = 0.0

    def add(self, value: float) -> None:
        y = value - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t
