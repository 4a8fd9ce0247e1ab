"""Time-uniform confidence sequences for the mean of bounded adaptive AIPW scores.

All three constructions work in [0, 1] outcome units, where the treatment
effect lies in [-1, 1] and a score produced at truncation level ``k``
lies in [-k, k].

* :class:`HedgedCS` inverts a grid of two-sided betting capital processes.
* :class:`PrPICS` is the closed-form predictable plug-in empirical
  Bernstein sequence (lower side plus mirrored upper side, alpha/2 each).
* :class:`AsympCS` is the asymptotic normal-mixture sequence.

Every sequence reports the whole parameter range before ``t_min`` and a
running intersection afterwards, so widths never increase.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ContractViolation, Interval

PARAM_BOUNDS = (-1.0, 1.0)


def psi_E(lam: float) -> float:
    """``-log(1 - lam) - lam`` for lam in [0, 1)."""
    if not 0.0 <= lam < 1.0:
        raise ContractViolation(f"psi_E needs 0 <= lambda < 1, got {lam}")
    return -math.log1p(-lam) - lam


def predictable_lambda(t: int, sigma2_prev: float, alpha: float, c: float = 0.5) -> float:
    """Bet size ``min(sqrt(2 log(2/alpha) / (sigma2_prev * t * log(1 + t))), c)``."""
    if t < 1 or not sigma2_prev > 0:
        raise ContractViolation(f"need t >= 1 and positive variance, got t={t}, var={sigma2_prev}")
    return min(math.sqrt(2.0 * math.log(2.0 / alpha) / (sigma2_prev * t * math.log1p(t))), c)


lambda_prpi = predictable_lambda


def running_intersect(prev: Interval, new: Interval) -> Interval:
    lo = max(prev.lower, new.lower)
    hi = min(prev.upper, new.upper)
    return Interval(lo, hi, empty=prev.empty or new.empty or lo > hi)


class RunningIntersection:
    """Intersection of all intervals seen from ``t_min`` on, clipped to ``bounds``."""

    def __init__(self, bounds=PARAM_BOUNDS, t_min: int = 1):
        self.full = Interval(*bounds)
        self.t_min = t_min
        self.current = self.full

    def update(self, t: int, new: Interval | None) -> Interval:
        if t >= self.t_min and new is not None:
            self.current = running_intersect(self.current, new)
        return self.current


# ---------------------------------------------------------------------------
# Predictable plug-in empirical Bernstein
# ---------------------------------------------------------------------------

class _PrPISide:
    """Lower confidence sequence for the mean of ``xi_t * (k_t + 1)``."""

    def __init__(self, alpha: float, c: float, sigma0_sq: float):
        self.alpha = alpha
        self.c = c
        self.log_thr = math.log(2.0 / alpha)
        self.n = 0
        self.sum_xi = 0.0
        self.sum_dev2 = 0.0
        self.sigma2 = sigma0_sq
        self.sigma0_sq = sigma0_sq
        self.num = 0.0     # sum lambda_t xi_t
        self.den = 0.0     # sum lambda_t / (k_t + 1)
        self.penalty = 0.0  # sum (xi_t - xi_hat_{t-1})^2 psi_E(lambda_t)
        self.edge_hits = 0

    def update(self, xi: float, k: float) -> float:
        t = self.n + 1
        cap = 1.0 / (k + 1.0)
        xi_hat = min(self.sum_xi / self.n, cap) if self.n else 0.0
        lam = predictable_lambda(t, self.sigma2, self.alpha, self.c)
        dev = xi - xi_hat
        if dev <= -1.0 + 1e-12:
            self.edge_hits += 1
        self.num += lam * xi
        self.den += lam * cap
        self.penalty += dev * dev * psi_E(lam)
        self.n = t
        self.sum_xi += xi
        xi_bar = min(self.sum_xi / t, cap)
        self.sum_dev2 += (xi - xi_bar) ** 2
        self.sigma2 = (self.sigma0_sq + self.sum_dev2) / (t + 1)
        return lam

    @property
    def center(self) -> float:
        return self.num / self.den

    @property
    def radius(self) -> float:
        return (self.log_thr + self.penalty) / self.den

    def log_process(self, theta: float) -> float:
        """Log of the supermartingale evaluated at mean ``theta``.

        Only meaningful when ``k`` stayed constant or when the caller knows
        ``den`` already folds in ``1/(k_t+1)``: the ``theta`` term is
        ``theta * sum lambda_t / (k_t + 1)``.
        """
        return self.num - theta * self.den - self.penalty


class PrPICS:
    """Closed-form predictable plug-in empirical Bernstein confidence sequence."""

    def __init__(self, alpha: float = 0.05, c: float = 0.5, sigma0_sq: float = 0.25,
                 t_min: int = 1, bounds=PARAM_BOUNDS):
        self.alpha = alpha
        self.lower_side = _PrPISide(alpha, c, sigma0_sq)
        self.upper_side = _PrPISide(alpha, c, sigma0_sq)
        self.running = RunningIntersection(bounds, t_min)
        self.t = 0
        self.raw = Interval(*bounds)

    @property
    def edge_hits(self) -> int:
        return self.lower_side.edge_hits + self.upper_side.edge_hits

    def update(self, h: float, k: float) -> Interval:
        if abs(h) > k * (1 + 1e-12):
            raise ContractViolation(f"score {h} exceeds truncation bound {k}")
        self.t += 1
        self.lower_side.update(h / (k + 1.0), k)
        self.upper_side.update(-h / (k + 1.0), k)
        lo = self.lower_side.center - self.lower_side.radius
        hi = -(self.upper_side.center - self.upper_side.radius)
        self.raw = Interval(lo, hi, empty=lo > hi)
        return self.running.update(self.t, self.raw)

    @property
    def interval(self) -> Interval:
        return self.running.current


def prpi_update(state: PrPICS, h: float, k: float) -> Interval:
    return state.update(h, k)


# ---------------------------------------------------------------------------
# Hedged betting confidence sequence
# ---------------------------------------------------------------------------

class HedgedCS:
    """Grid inversion of ``M_t(theta) = m K+_t(theta) + (1 - m) K-_t(theta)``.

    ``K+`` bets that the mean exceeds ``theta`` and ``K-`` that it falls
    below.  One bet size per step (shrinkage estimates with priors 1/2 and
    1/4, capped at ``c``) is clipped per grid point so each capital factor
    stays strictly positive given ``|h| <= k``.  Capital is kept in logs.
    """

    def __init__(self, alpha: float = 0.05, grid_size: int = 1000, m: float = 0.5,
                 c: float = 0.5, eps: float = 1e-6, refine: bool = True,
                 t_min: int = 1, bounds=PARAM_BOUNDS):
        if not 0 <= m <= 1:
            raise ContractViolation(f"mix weight must lie in [0, 1], got {m}")
        self.alpha = alpha
        self.m = m
        self.c = c
        self.eps = eps
        self.refine = refine
        self.log_thr = math.log(1.0 / alpha)
        self.grid = np.linspace(bounds[0], bounds[1], grid_size)
        self.log_kp = np.zeros(grid_size)
        self.log_km = np.zeros(grid_size)
        with np.errstate(divide="ignore"):
            self._log_m = math.log(m) if m > 0 else -math.inf
            self._log_1m = math.log1p(-m) if m < 1 else -math.inf
        self.running = RunningIntersection(bounds, t_min)
        self.t = 0
        self._sum_h = 0.0
        self._sum_dev2 = 0.0
        self.sigma2 = 0.25
        self._hist = np.empty((3, 256))  # rows: h, lambda, k
        self.gaps = 0
        self.raw = Interval(*bounds)

    # bet sizing -------------------------------------------------------
    def next_lambda(self) -> float:
        """Bet size for the next observation (uses only the past)."""
        return predictable_lambda(self.t + 1, self.sigma2, self.alpha, self.c)

    def bet_limits(self, theta, k: float):
        """Largest admissible bets for K+ and K- at ``theta`` (open bounds shrunk by eps)."""
        return (1.0 - self.eps) / (k + theta), (1.0 - self.eps) / (k - theta)

    def _log_factors(self, h, lam, k, theta):
        up, down = self.bet_limits(theta, k)
        dev = h - theta
        return (np.log1p(np.minimum(lam, up) * dev),
                np.log1p(-np.minimum(lam, down) * dev))

    # capital ----------------------------------------------------------
    def log_mix(self, log_kp, log_km):
        return np.logaddexp(self._log_m + log_kp, self._log_1m + log_km)

    def log_capital(self, theta: float) -> tuple[float, float]:
        """(log K+, log K-) at an arbitrary ``theta``, recomputed from history."""
        n = self.t
        if n == 0:
            return 0.0, 0.0
        h, lam, k = self._hist[:, :n]
        lp, lm = self._log_factors(h, lam, k, theta)
        return float(lp.sum()), float(lm.sum())

    def log_M(self, theta: float) -> float:
        return float(self.log_mix(*self.log_capital(theta)))

    def grid_log_M(self) -> np.ndarray:
        return self.log_mix(self.log_kp, self.log_km)

    # update -----------------------------------------------------------
    def update(self, h: float, k: float) -> Interval:
        if abs(h) > k * (1 + 1e-12):
            raise ContractViolation(f"score {h} exceeds truncation bound {k}")
        lam = self.next_lambda()
        lp, lm = self._log_factors(h, lam, k, self.grid)
        self.log_kp += lp
        self.log_km += lm

        t = self.t + 1
        theta_hat = (0.5 + self._sum_h) / t
        self._sum_h += h
        self._sum_dev2 += (h - theta_hat) ** 2
        self.sigma2 = (0.25 + self._sum_dev2) / t
        if t > self._hist.shape[1]:
            self._hist = np.concatenate([self._hist, np.empty_like(self._hist)], axis=1)
        self._hist[:, t - 1] = (h, lam, k)
        self.t = t

        if t < self.running.t_min:
            return self.running.current
        self.raw = self._extract()
        return self.running.update(t, self.raw)

    def _extract(self) -> Interval:
        inside = self.grid_log_M() < self.log_thr
        idx = np.flatnonzero(inside)
        if idx.size == 0:
            return Interval(math.nan, math.nan, empty=True)
        first, last = int(idx[0]), int(idx[-1])
        if last - first + 1 != idx.size:
            self.gaps += 1
        g = self.grid
        lo, hi = float(g[first]), float(g[last])
        if self.refine:
            if first > 0:
                mid = 0.5 * (g[first - 1] + g[first])
                if self.log_M(mid) < self.log_thr:
                    lo = float(mid)
            if last < g.size - 1:
                mid = 0.5 * (g[last] + g[last + 1])
                if self.log_M(mid) < self.log_thr:
                    hi = float(mid)
        return Interval(lo, hi)

    @property
    def interval(self) -> Interval:
        return self.running.current


def hedged_update(state: HedgedCS, h: float, k: float) -> Interval:
    return state.update(h, k)


# ---------------------------------------------------------------------------
# Asymptotic confidence sequence
# ---------------------------------------------------------------------------

def asymp_radius(sigma2: float, T: int, rho: float = 0.5, alpha: float = 0.05) -> float:
    if T < 1 or sigma2 < 0 or not rho > 0:
        raise ContractViolation(f"need T >= 1, sigma2 >= 0, rho > 0; got {T}, {sigma2}, {rho}")
    u = T * sigma2 * rho * rho + 1.0
    return math.sqrt(2.0 * u / (T * T * rho * rho) * math.log(math.sqrt(u) / alpha))


def asymp_interval(mean: float, sigma2: float, T: int, rho: float = 0.5,
                   alpha: float = 0.05) -> Interval:
    r = asymp_radius(sigma2, T, rho, alpha)
    return Interval(mean - r, mean + r)


def rho_opt(alpha: float, T_star: float) -> float:
    """Mixing scale making the asymptotic sequence (approximately) tightest at ``T_star``.

    The approximation is in intrinsic time: pass ``T * sigma2`` when the
    score variance is far from one.
    """
    if not 0 < alpha < 1 or not T_star > 0:
        raise ContractViolation(f"need 0 < alpha < 1 and T_star > 0, got {alpha}, {T_star}")
    a = -2.0 * math.log(alpha)
    return math.sqrt((a + math.log(a + 1.0)) / T_star)


class AsympCS:
    """Running-intersected asymptotic sequence fed from an :class:`EstimatorState`."""

    def __init__(self, alpha: float = 0.05, rho: float = 0.5, t_min: int = 1,
                 bounds=PARAM_BOUNDS):
        self.alpha = alpha
        self.rho = rho
        self.running = RunningIntersection(bounds, t_min)
        self.raw = Interval(*bounds)

    def update(self, state) -> Interval:
        T = state.t
        if T < self.running.t_min:
            return self.running.current
        self.raw = asymp_interval(state.mean, state.variance, T, self.rho, self.alpha)
        return self.running.update(T, self.raw)

    @property
    def interval(self) -> Interval:
        return self.running.current
