"""Simulated experiments with known average treatment effect.

``logit`` in the original data-generating displays is read as the logistic
sigmoid, the only reading that yields valid Bernoulli probabilities.
Every function accepts a single context vector or a stacked ``(n, 3)``
array of contexts.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..core import ConfigError, OutcomeRange

BETA_GAUSS = np.array([-2.0, -3.0, 5.0])
BETA_UNIFORM = np.array([-0.04, -0.01, 0.05])


def _moments_to_unit(mean, second, rng_: OutcomeRange):
    lo, s = rng_.lo, rng_.scale
    return (mean - lo) / s, (second - 2 * lo * mean + lo * lo) / (s * s)


class DGP:
    name = ""
    dim = 3
    theta0 = 0.0
    outcome_range = OutcomeRange(0.0, 1.0)

    def sample_context(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def outcome(self, rng: np.random.Generator, a, x):
        raise NotImplementedError

    def mean(self, a, x):
        raise NotImplementedError

    def variance(self, a, x):
        raise NotImplementedError

    def second_moment(self, a, x):
        return self.variance(a, x) + self.mean(a, x) ** 2

    def unit_moments(self, a, x) -> tuple[float, float]:
        """(E[Y'|a,x], E[Y'^2|a,x]) with Y' the outcome mapped onto [0, 1]."""
        f, e = _moments_to_unit(self.mean(a, x), self.second_moment(a, x), self.outcome_range)
        return float(f), float(e)

    def unit_variance(self, a, x) -> float:
        return float(self.variance(a, x)) / self.outcome_range.scale ** 2


class BernoulliDGP(DGP):
    """Gaussian contexts, ``Y ~ Bernoulli(0.9 sigmoid(0.5 + x.beta) + theta0 * a)``."""

    name = "bernoulli"

    def __init__(self, theta0: float = 0.1):
        if not 0.0 <= theta0 <= 0.1:
            raise ConfigError(f"bernoulli dgp needs theta0 in [0, 0.1], got {theta0}")
        self.theta0 = theta0

    def sample_context(self, rng, n=None):
        return rng.standard_normal(3 if n is None else (n, 3))

    def prob(self, a, x):
        return 0.9 * expit(0.5 + np.asarray(x) @ BETA_GAUSS) + self.theta0 * np.asarray(a)

    def outcome(self, rng, a, x):
        p = self.prob(a, x)
        if np.ndim(p) == 0:
            return float(rng.random() < p)
        return (rng.random(np.shape(p)) < p).astype(float)

    def mean(self, a, x):
        return self.prob(a, x)

    def second_moment(self, a, x):
        return self.prob(a, x)

    def variance(self, a, x):
        p = self.prob(a, x)
        return p * (1 - p)


class BoundedDGP(DGP):
    """Uniform contexts with heteroskedastic uniform noise on the treated arm.

    Control: ``0.4 + x.beta + U(-0.05, 0.05)``.  Treated:
    ``0.4 + x.beta + theta0 + U(-4.5|x.beta|, 4.5|x.beta|)`` (endpoints sorted).
    """

    name = "bounded"

    def __init__(self, theta0: float = 0.1):
        self.theta0 = theta0
        s_lo = BETA_UNIFORM[BETA_UNIFORM < 0].sum()
        s_hi = BETA_UNIFORM[BETA_UNIFORM > 0].sum()
        ends = [s + sign * 4.5 * abs(s) for s in (s_lo, s_hi) for sign in (-1, 1)]
        lo = min(0.4 + s_lo - 0.05, 0.4 + theta0 + min(ends))
        hi = max(0.4 + s_hi + 0.05, 0.4 + theta0 + max(ends))
        self.outcome_range = OutcomeRange(float(lo), float(hi))

    def sample_context(self, rng, n=None):
        return rng.random(3 if n is None else (n, 3))

    def _half_width(self, a, x):
        s = np.asarray(x) @ BETA_UNIFORM
        a = np.asarray(a)
        return s, np.where(a == 1, 4.5 * np.abs(s), 0.05)

    def outcome(self, rng, a, x):
        s, half = self._half_width(a, x)
        y = 0.4 + s + self.theta0 * np.asarray(a) + rng.uniform(-half, half)
        return float(y) if np.ndim(y) == 0 else y

    def mean(self, a, x):
        return 0.4 + np.asarray(x) @ BETA_UNIFORM + self.theta0 * np.asarray(a)

    def variance(self, a, x):
        _, half = self._half_width(a, x)
        return (2 * half) ** 2 / 12.0


class TruncationStudyDGP(BernoulliDGP):
    """``Y ~ Bernoulli(0.1 sigmoid(0.5 + x.beta) + 0.4 a)``; the effect is 0.4."""

    name = "truncation_study"

    def __init__(self):
        self.theta0 = 0.4

    def prob(self, a, x):
        return 0.1 * expit(0.5 + np.asarray(x) @ BETA_GAUSS) + 0.4 * np.asarray(a)


DGPS = {"bernoulli": BernoulliDGP, "bounded": BoundedDGP, "truncation_study": TruncationStudyDGP}


def make_dgp(name: str, theta0: float | None = None) -> DGP:
    try:
        cls = DGPS[name]
    except KeyError:
        raise ConfigError(f"dgp: unknown kind {name!r}; expected one of {sorted(DGPS)}") from None
    if cls is TruncationStudyDGP:
        if theta0 is not None and theta0 != 0.4:
            raise ConfigError("dgp: truncation_study has a fixed effect of 0.4")
        return cls()
    return cls() if theta0 is None else cls(theta0)


def dgp_bernoulli(rng, theta0, a, x):
    return BernoulliDGP(theta0).outcome(rng, a, x)


def dgp_bounded(rng, theta0, a, x):
    return BoundedDGP(theta0).outcome(rng, a, x)


def dgp_truncation_study(rng, a, x):
    return TruncationStudyDGP().outcome(rng, a, x)
