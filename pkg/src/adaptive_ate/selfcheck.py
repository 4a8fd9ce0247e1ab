"""Fast invariant checks runnable from the command line.

Each check recomputes its expected value independently of the code path
under test.  ``mutations`` deliberately breaks a primitive so that the
suite can demonstrate it catches the fault.
"""
from __future__ import annotations

import contextlib
import math
import time
from typing import Callable

import numpy as np

from . import confseq
from .core import OutcomeRange, rescale, seeded_rng, unrescale
from .estimator import score

MUTATIONS = ("psi_E", "score")


def _check_score_bound(n: int = 200_000) -> str:
    rng = seeded_rng(7, 0)
    k = rng.uniform(2, 100, n)
    pi = rng.uniform(1 / k, 1 - 1 / k)
    y, f1, f0 = rng.random((3, n))
    a = rng.integers(0, 2, n)
    from . import estimator
    h = np.array([estimator.score(*args) for args in zip(y[:2000], a[:2000], f1[:2000], f0[:2000], pi[:2000])])
    worst = float(np.max(np.abs(h) / k[:2000]))
    # vectorised form of the same score for the bulk
    hv = np.where(a == 1, (y - f1) / pi, -(y - f0) / (1 - pi)) + f1 - f0
    worst = max(worst, float(np.max(np.abs(hv) / k)))
    if not np.allclose(h, hv[:2000], rtol=0, atol=1e-12):
        raise AssertionError("scalar score disagrees with direct formula")
    if worst > 1 + 1e-12:
        raise AssertionError(f"|h|/k reached {worst}")
    return f"max |h|/k = {worst:.4f}"


def _check_psi() -> str:
    for lam, want in ((0.0, 0.0), (0.5, math.log(2) - 0.5), (0.9, math.log(10) - 0.9)):
        got = confseq.psi_E(lam)
        if abs(got - want) > 1e-12:
            raise AssertionError(f"psi_E({lam}) = {got}, expected {want}")
    return "psi_E(0.5) = ln 2 - 0.5"


def _check_rho() -> str:
    alpha = 0.05
    worst = 0.0
    for T in (50, 100, 1000, 5000):
        grid = np.exp(np.linspace(math.log(1e-4), math.log(50.0), 20001))
        u = T * grid ** 2 + 1
        rad = np.sqrt(2 * u / (T * T * grid ** 2) * np.log(np.sqrt(u) / alpha))
        best = grid[np.argmin(rad)]
        worst = max(worst, abs(confseq.rho_opt(alpha, T) / best - 1))
    if worst > 0.05:
        raise AssertionError(f"rho_opt off by {worst:.3%} from grid minimiser")
    return f"rho_opt within {worst:.2%} of grid minimiser (unit variance)"


def _check_rescale() -> str:
    r = OutcomeRange(1.0, 5.0)
    for y in np.linspace(1, 5, 101):
        if abs(unrescale(rescale(y, r), r) - y) > 1e-12:
            raise AssertionError("rescale round trip failed")
    if rescale(3.0, r) != 0.5:
        raise AssertionError("rescale(3, [1,5]) != 0.5")
    return "rescale round trip exact"


def _check_prpi_ville(n_streams: int = 5, T: int = 300) -> str:
    worst = 0.0
    alpha = 0.05
    for s in range(n_streams):
        rng = seeded_rng(11, s)
        k = rng.uniform(2, 6)
        h = rng.uniform(-k, k, T) * rng.random(T)
        cs = confseq.PrPICS(alpha)
        for v in h:
            cs.update(float(v), k)
        # independent recomputation of the lower-side log supermartingale
        num = den = pen = 0.0
        xs, sq, sig2 = [], 0.0, 0.25
        for t, v in enumerate(h, 1):
            xi = v / (k + 1)
            xhat = min(sum(xs) / len(xs), 1 / (k + 1)) if xs else 0.0
            lam = min(math.sqrt(2 * math.log(2 / alpha) / (sig2 * t * math.log(1 + t))), 0.5)
            num += lam * xi
            den += lam / (k + 1)
            pen += (xi - xhat) ** 2 * (-math.log(1 - lam) - lam)
            xs.append(xi)
            sq += (xi - min(sum(xs) / t, 1 / (k + 1))) ** 2
            sig2 = (0.25 + sq) / (t + 1)
        theta = cs.raw.lower
        log_m = num - theta * den - pen
        worst = max(worst, abs(log_m - math.log(2 / alpha)) / math.log(2 / alpha))
    if worst > 1e-6:
        raise AssertionError(f"lower endpoint misses the Ville threshold by {worst:.2e} (relative)")
    return f"Ville threshold matched to {worst:.1e}"


def _check_martingale(n: int = 20_000) -> str:
    from .sim.dgp import BernoulliDGP

    dgp = BernoulliDGP(0.1)
    rng = seeded_rng(3, 0)
    x = dgp.sample_context(rng, n)
    pi = 0.3
    a = (rng.random(n) < pi).astype(int)
    y = dgp.outcome(rng, a, x)
    f1, f0 = dgp.mean(1, x), dgp.mean(0, x)
    h = np.where(a == 1, (y - f1) / pi, -(y - f0) / (1 - pi)) + f1 - f0
    # unequal prior capitals so the hedge does not cancel trivially
    lam, kp, km = 0.2, 2.0, 0.5
    d = h - 0.1
    ratio = (0.5 * kp * (1 + lam * d) + 0.5 * km * (1 - lam * d)) / (0.5 * (kp + km))
    se = ratio.std(ddof=1) / math.sqrt(n)
    if abs(ratio.mean() - 1) > 4 * se:
        raise AssertionError(f"one-step capital ratio mean {ratio.mean():.4f} not ~1 (se {se:.4f})")
    return f"one-step capital ratio {ratio.mean():.4f} +- {se:.4f}"


CHECKS: dict[str, Callable[[], str]] = {
    "score bound": _check_score_bound,
    "psi_E values": _check_psi,
    "rho_opt vs grid": _check_rho,
    "rescale": _check_rescale,
    "PrPI Ville boundary": _check_prpi_ville,
    "martingale one-step": _check_martingale,
}


@contextlib.contextmanager
def _mutated(mutations):
    from . import estimator

    saved = []
    try:
        for name in mutations:
            if name == "psi_E":
                saved.append((confseq, "psi_E", confseq.psi_E))
                confseq.psi_E = lambda lam: -math.log1p(-lam) - 1.01 * lam
            elif name == "score":
                saved.append((estimator, "score", estimator.score))
                orig = estimator.score
                estimator.score = lambda y, a, f1, f0, pi1: 1.5 * orig(y, a, f1, f0, pi1)
            else:
                raise ValueError(f"unknown mutation {name!r}; choose from {MUTATIONS}")
        yield
    finally:
        for mod, attr, val in saved:
            setattr(mod, attr, val)


def run_selfcheck(mutations=(), echo: Callable[[str], None] | None = print) -> bool:
    """Run every check; returns True when all pass."""
    ok = True
    start = time.perf_counter()
    with _mutated(mutations):
        for name, fn in CHECKS.items():
            try:
                detail = fn()
                line = f"PASS  {name}: {detail}"
            except AssertionError as err:
                ok = False
                line = f"FAIL  {name}: {err}"
            if echo:
                echo(line)
    if echo:
        echo(f"{'all checks passed' if ok else 'self-check FAILED'} in {time.perf_counter() - start:.1f}s")
    return ok
