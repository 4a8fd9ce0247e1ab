"""Sequential experiment loop: assign, observe, score, update every interval."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..confseq import AsympCS, HedgedCS, PrPICS
from ..core import (
    InferenceNotReady,
    Interval,
    Observation,
    OutcomeRange,
    ScoreRecord,
    rescale,
    seeded_rng,
)
from ..estimator import EstimatorState, clt_interval, score
from ..policy import A2IPWPolicy, FixedPolicy, OracleAIPWPolicy, next_k, sample_arm
from ..regression import KNNRegressor, OracleRegressor, SplitRegressor
from .config import ExperimentConfig
from .dgp import DGP, make_dgp

MAIN_STREAM = 0
FOLD_STREAM = 1


def outcome_range_for(cfg: ExperimentConfig, dgp: DGP | None) -> OutcomeRange:
    if cfg.outcome_range is not None:
        return cfg.outcome_range
    if dgp is not None:
        return dgp.outcome_range
    return OutcomeRange(0.0, 1.0)


def build_regressor(cfg: ExperimentConfig, dgp: DGP | None) -> SplitRegressor:
    if cfg.model.kind == "oracle":
        rng_ = outcome_range_for(cfg, dgp)
        if rng_ != dgp.outcome_range:
            def moments(a, x):
                m, s = dgp.mean(a, x), dgp.second_moment(a, x)
                lo, sc = rng_.lo, rng_.scale
                return float((m - lo) / sc), float((s - 2 * lo * m + lo * lo) / sc ** 2)
        else:
            moments = dgp.unit_moments
        return OracleRegressor(moments, vfloor=cfg.model.vfloor)
    k = cfg.model.k
    return SplitRegressor(lambda: KNNRegressor(k=k), warmup=cfg.model.warmup,
                          vfloor=cfg.model.vfloor)


def build_policy(cfg: ExperimentConfig, regressor: SplitRegressor, dgp: DGP | None):
    kind = cfg.policy.kind
    if kind == "fixed":
        return FixedPolicy(cfg.policy.p)
    if kind == "oracle-aipw":
        return OracleAIPWPolicy(dgp.unit_variance, warmup=cfg.policy_warmup)
    return A2IPWPolicy(regressor, warmup=cfg.policy_warmup)


class InferenceEngine:
    """Consumes logged (x, a, y, pi1, k) rows and maintains every requested interval.

    Outcomes are rescaled to [0, 1] on entry; intervals are returned in raw
    outcome units.  The fold of each row is drawn from ``fold_rng`` in row
    order, so a simulated stream replayed through a fresh engine with the
    same fold stream reproduces the simulation exactly.
    """

    def __init__(self, cfg: ExperimentConfig, regressor: SplitRegressor,
                 outcome_range: OutcomeRange, fold_rng: np.random.Generator):
        self.cfg = cfg
        self.regressor = regressor
        self.range = outcome_range
        self.fold_rng = fold_rng
        self.methods = tuple(cfg.methods)
        self.scale = outcome_range.scale
        self.full = Interval(-self.scale, self.scale)
        self.estimator = EstimatorState(keep_history=False)
        cs = cfg.confseq
        self.hedged = HedgedCS(cfg.alpha, cs.grid_size, cs.m, cs.c, t_min=cfg.t_min) \
            if "hedged" in self.methods else None
        self.prpi = PrPICS(cfg.alpha, cs.c, cs.sigma0_sq, t_min=cfg.t_min) \
            if "prpi" in self.methods else None
        self.asymp = AsympCS(cfg.alpha, cs.rho, t_min=cfg.t_min) if "asymp" in self.methods else None
        self.t = 0

    def step(self, t: int, x, a: int, y: float, pi1: float, k: float):
        """Process one subject; returns (ScoreRecord, {method: Interval in raw units})."""
        y01 = rescale(y, self.range)
        self.regressor.assign_fold(t, self.fold_rng)
        f1, _ = self.regressor.predict_for_score(x, 1, t)
        f0, _ = self.regressor.predict_for_score(x, 0, t)
        h = score(y01, a, f1, f0, pi1)
        rec = ScoreRecord(t, h, pi1, k, f1, f0)
        self.estimator.update(h)
        self.t += 1
        n = self.estimator.t
        out = {}
        for method in self.methods:
            if method == "clt":
                iv = self.full
                if n >= self.cfg.t_min:
                    try:
                        iv = clt_interval(self.estimator, self.cfg.alpha).scaled(self.scale)
                    except InferenceNotReady:
                        pass
            elif method == "hedged":
                iv = self.hedged.update(h, k).scaled(self.scale)
            elif method == "prpi":
                iv = self.prpi.update(h, k).scaled(self.scale)
            else:
                iv = self.asymp.update(self.estimator).scaled(self.scale)
            out[method] = iv
        self.regressor.update(Observation(t, np.asarray(x, dtype=float), a, y01))
        return rec, out

    def diagnostics(self) -> dict:
        d = {}
        if self.hedged is not None:
            d["hedged_gaps"] = self.hedged.gaps
        if self.prpi is not None:
            d["prpi_edge_hits"] = self.prpi.edge_hits
        return d


@dataclass
class Trajectory:
    """Everything recorded during one simulated experiment (raw outcome units)."""

    iter_id: int
    theta0: float | None
    scale: float
    t_min: int
    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    pi1_raw: np.ndarray
    pi1: np.ndarray
    k: np.ndarray
    h: np.ndarray
    f1: np.ndarray
    f0: np.ndarray
    lower: dict[str, np.ndarray] = field(default_factory=dict)
    upper: dict[str, np.ndarray] = field(default_factory=dict)
    empty: dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.h)

    @property
    def methods(self) -> tuple[str, ...]:
        return tuple(self.lower)

    def width(self, method: str) -> np.ndarray:
        w = self.upper[method] - self.lower[method]
        return np.where(self.empty[method], 0.0, w)

    def covers(self, method: str, value: float) -> np.ndarray:
        return (~self.empty[method]) & (self.lower[method] <= value) & (value <= self.upper[method])


def run_experiment(cfg: ExperimentConfig, iter_id: int = 0, check_monotone: bool = False) -> Trajectory:
    """Simulate one experiment of ``cfg.T`` subjects on random stream ``(seed, iter_id)``."""
    dgp = make_dgp(cfg.dgp, cfg.theta0)
    rng_ = outcome_range_for(cfg, dgp)
    rng = seeded_rng(cfg.seed, iter_id, MAIN_STREAM)
    regressor = build_regressor(cfg, dgp)
    policy = build_policy(cfg, regressor, dgp)
    engine = InferenceEngine(cfg, regressor, rng_, seeded_rng(cfg.seed, iter_id, FOLD_STREAM))
    schedule = cfg.policy.schedule

    T = cfg.T
    cols = {name: np.empty(T) for name in ("y", "pi1_raw", "pi1", "k", "h", "f1", "f0")}
    xs = np.empty((T, dgp.dim))
    arms = np.empty(T, dtype=np.int8)
    lower = {m: np.empty(T) for m in cfg.methods}
    upper = {m: np.empty(T) for m in cfg.methods}
    empty = {m: np.zeros(T, dtype=bool) for m in cfg.methods}

    k = None
    for t in range(1, T + 1):
        k = next_k(schedule, k, t)
        x = dgp.sample_context(rng)
        dec = policy.decide(x, t, k)
        a = sample_arm(dec.pi1, rng)
        y = dgp.outcome(rng, a, x)
        rec, ivs = engine.step(t, x, a, y, dec.pi1, k)
        i = t - 1
        xs[i] = x
        arms[i] = a
        cols["y"][i] = y
        cols["pi1_raw"][i] = dec.pi1_raw
        cols["pi1"][i] = dec.pi1
        cols["k"][i] = k
        cols["h"][i] = rec.h
        cols["f1"][i] = rec.f1_hat
        cols["f0"][i] = rec.f0_hat
        for m, iv in ivs.items():
            lower[m][i] = iv.lower
            upper[m][i] = iv.upper
            empty[m][i] = iv.empty

    traj = Trajectory(iter_id=iter_id, theta0=dgp.theta0, scale=rng_.scale, t_min=cfg.t_min,
                      x=xs, a=arms, lower=lower, upper=upper, empty=empty,
                      diagnostics=engine.diagnostics(), **cols)
    if check_monotone:
        assert_monotone_widths(traj)
    return traj


def assert_monotone_widths(traj: Trajectory, methods=("hedged", "prpi", "asymp")) -> None:
    for m in methods:
        if m not in traj.lower:
            continue
        w = traj.width(m)
        if np.any(np.diff(w) > 1e-12 * traj.scale):
            t_bad = int(np.argmax(np.diff(w) > 1e-12 * traj.scale)) + 2
            raise AssertionError(f"{m} width increased at t={t_bad} in iteration {traj.iter_id}")


def _run_one(args):
    cfg, iter_id, check = args
    return run_experiment(cfg, iter_id, check)


def run_many(cfg: ExperimentConfig, iter_ids=None, workers: int | None = None,
             check_monotone: bool = False) -> list[Trajectory]:
    """Run independent iterations, optionally across processes; output order follows ``iter_ids``."""
    ids = list(range(cfg.n_iters)) if iter_ids is None else list(iter_ids)
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, i, check_monotone) for i in ids]
    if workers <= 1 or len(ids) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(ids) // (4 * workers))))


def mean_estimate_error(traj: Trajectory) -> float:
    """|mean score - theta0| in raw units (diagnostic)."""
    return abs(float(np.mean(traj.h)) * traj.scale - traj.theta0) if traj.theta0 is not None else math.nan
