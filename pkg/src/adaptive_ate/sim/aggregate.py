"""Monte Carlo reduction of trajectories into cumulative miscoverage and power curves."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AggregateResult:
    """Per-method curves indexed by t = 1..T.

    ``cum_miscoverage[m][t-1]`` is the fraction of iterations whose interval
    excluded the true effect at some s in [t_min, t]; ``cum_power`` is the
    same for zero.
    """

    T: int
    t_min: int
    n_iters: int
    cum_miscoverage: dict[str, np.ndarray] = field(default_factory=dict)
    cum_power: dict[str, np.ndarray] = field(default_factory=dict)
    mean_width: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def methods(self) -> tuple[str, ...]:
        return tuple(self.mean_width)

    def summary(self) -> list[tuple[str, float, float, float]]:
        return [(m, float(self.cum_miscoverage[m][-1]), float(self.cum_power[m][-1]),
                 float(self.mean_width[m][-1])) for m in self.methods]


def cumulative_fraction(excluded: np.ndarray, t_min: int) -> np.ndarray:
    """Fraction of rows (iterations) with an exclusion at some s in [t_min, t]."""
    excluded = np.asarray(excluded, dtype=bool).copy()
    excluded[:, : t_min - 1] = False
    return np.logical_or.accumulate(excluded, axis=1).mean(axis=0)


def aggregate_arrays(covered: dict, rejects_zero: dict, widths: dict, t_min: int) -> AggregateResult:
    """Reduce ``(n_iters, T)`` boolean/width arrays keyed by method."""
    first = next(iter(widths.values()))
    n, T = np.shape(first)
    res = AggregateResult(T=T, t_min=t_min, n_iters=n)
    for m in widths:
        res.cum_miscoverage[m] = cumulative_fraction(~np.asarray(covered[m], dtype=bool), t_min)
        res.cum_power[m] = cumulative_fraction(np.asarray(rejects_zero[m], dtype=bool), t_min)
        res.mean_width[m] = np.asarray(widths[m], dtype=float).mean(axis=0)
        for curve in (res.cum_miscoverage[m], res.cum_power[m]):
            assert np.all(np.diff(curve) >= 0), f"cumulative curve for {m} is not monotone"
    return res


def aggregate(trajectories, t_min: int | None = None) -> AggregateResult:
    """Aggregate in-memory :class:`Trajectory` objects (order does not matter)."""
    trajectories = sorted(trajectories, key=lambda tr: tr.iter_id)
    if not trajectories:
        raise ValueError("need at least one completed iteration")
    t_min = trajectories[0].t_min if t_min is None else t_min
    methods = trajectories[0].methods
    covered, rejects, widths = {}, {}, {}
    for m in methods:
        covered[m] = np.stack([tr.covers(m, tr.theta0) for tr in trajectories])
        rejects[m] = ~np.stack([tr.covers(m, 0.0) for tr in trajectories])
        widths[m] = np.stack([tr.width(m) for tr in trajectories])
    return aggregate_arrays(covered, rejects, widths, t_min)
