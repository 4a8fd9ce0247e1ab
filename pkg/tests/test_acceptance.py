"""Acceptance suite: reduced-scale Monte Carlo reproductions and oracle checks.

Every test prints one ``criterion N: PASS/FAIL`` line; the lines are also
collected in the terminal summary.  Runs take several minutes in total.
"""
import math
import os

import numpy as np
import pytest

from adaptive_ate.cli import main
from adaptive_ate.confseq import HedgedCS, PrPICS, asymp_radius, psi_E, rho_opt
from adaptive_ate.core import TruncationSchedule, seeded_rng
from adaptive_ate.estimator import score
from adaptive_ate.policy import aipw_policy, truncate
from adaptive_ate.sim.aggregate import aggregate
from adaptive_ate.sim.config import config_from_mapping
from adaptive_ate.sim.dgp import BernoulliDGP
from adaptive_ate.sim.experiment import assert_monotone_widths, run_experiment, run_many

pytestmark = pytest.mark.slow

WORKERS = os.cpu_count() or 1
ALPHA = 0.05


@pytest.fixture(scope="module")
def bernoulli_runs():
    """Criterion 1 suite; widths are checked for monotonicity inside every run."""
    cfg = config_from_mapping(dict(dgp="bernoulli", theta0=0.1, T=2000, n_iters=200,
                                   alpha=ALPHA, t_min=50, seed=2024))
    return cfg, run_many(cfg, workers=WORKERS, check_monotone=True)


def test_criterion_1_time_uniform_coverage(bernoulli_runs, criterion):
    cfg, trajs = bernoulli_runs
    res = aggregate(trajs)
    miss = {m: float(res.cum_miscoverage[m][-1]) for m in ("hedged", "prpi", "asymp")}
    ok = miss["hedged"] <= 0.081 and miss["prpi"] <= 0.081 and miss["asymp"] <= 0.12
    detail = ", ".join(f"{m} {v:.3f}" for m, v in miss.items())
    assert criterion(1, ok, f"cumulative miscoverage at T=2000 over {len(trajs)} runs: {detail}")


def test_criterion_2_clt_fixed_time_coverage(bernoulli_runs, criterion):
    cfg, trajs = bernoulli_runs
    # same seed and iteration ids, so iterations 0..199 would be reproduced exactly
    extra = run_many(cfg.replace(methods=("clt",)), iter_ids=range(200, 500), workers=WORKERS)
    covered = [tr.covers("clt", tr.theta0)[-1] for tr in list(trajs) + extra]
    cov = float(np.mean(covered))
    ok = 0.92 <= cov <= 0.98
    assert criterion(2, ok, f"CLT coverage at T=2000 over {len(covered)} runs: {cov:.3f}")


def test_criterion_3_width_ordering(criterion):
    cfg = config_from_mapping(dict(dgp="bounded", theta0=0.1, T=5000, n_iters=50, seed=7,
                                   methods=["hedged", "prpi", "asymp"]))
    trajs = run_many(cfg, workers=WORKERS)
    med = {m: float(np.median([tr.width(m)[-1] for tr in trajs])) for m in cfg.methods}
    ok = med["asymp"] < med["hedged"] < med["prpi"]
    detail = ", ".join(f"{m} {v:.4f}" for m, v in med.items())
    assert criterion(3, ok, f"median widths at T=5000: {detail}")


def test_criterion_4_truncation_crossover(criterion):
    pi_mins = (0.1, 0.2, 0.3, 0.4, 0.45, 0.5)
    at200, at5000 = [], []
    for p in pi_mins:
        cfg = config_from_mapping(dict(
            dgp="truncation_study", T=5000, n_iters=50, seed=31, methods=["prpi"],
            policy={"kind": "oracle-aipw", "schedule": {"pi_min": p}}))
        trajs = run_many(cfg, workers=WORKERS)
        w = np.array([tr.width("prpi") for tr in trajs])
        at200.append(float(np.median(w[:, 199])))
        at5000.append(float(np.median(w[:, -1])))
    ok = all(b <= a for a, b in zip(at200, at200[1:])) and at5000[0] < at5000[-1]
    detail = "t=200 [" + ", ".join(f"{v:.3f}" for v in at200) + "], t=5000 " \
             f"pi_min 0.1: {at5000[0]:.4f} vs 0.5: {at5000[-1]:.4f}"
    assert criterion(4, ok, detail)


def test_criterion_5_martingale_fairness(criterion):
    dgp = BernoulliDGP(0.1)
    theta0 = dgp.theta0  # outcomes already lie in [0, 1]
    schedule = TruncationSchedule()
    n_hist, n_rep = 300, 100_000

    def draw(rng, n, k):
        x = dgp.sample_context(rng, n)
        v1, v0 = dgp.variance(1, x), dgp.variance(0, x)
        pi = np.clip(np.sqrt(v1) / (np.sqrt(v1) + np.sqrt(v0)), 1 / k, 1 - 1 / k)
        a = (rng.random(n) < pi).astype(int)
        y = dgp.outcome(rng, a, x)
        f1, f0 = dgp.mean(1, x), dgp.mean(0, x)
        return np.where(a == 1, (y - f1) / pi, -(y - f0) / (1 - pi)) + f1 - f0

    # history under the oracle-variance policy with oracle regressions
    rng = seeded_rng(55, 0)
    hedged, prpi = HedgedCS(ALPHA, t_min=1), PrPICS(ALPHA, t_min=1)
    for t in range(1, n_hist + 1):
        k = schedule.k_closed_form(t)
        h = float(draw(rng, 1, k)[0])
        hedged.update(h, k)
        prpi.update(h, k)
    k = schedule.k_closed_form(n_hist + 1)
    h_next = draw(seeded_rng(55, 1), n_rep, k)

    # betting mixture at theta0
    lam = hedged.next_lambda()
    up, down = hedged.bet_limits(theta0, k)
    lkp, lkm = hedged.log_capital(theta0)
    w = 1.0 / (1.0 + math.exp(lkm - lkp))  # weight of K+ in the current mixture
    d = h_next - theta0
    ratio = w * (1 + min(lam, up) * d) + (1 - w) * (1 - min(lam, down) * d)
    se = ratio.std(ddof=1) / math.sqrt(n_rep)
    fair = abs(ratio.mean() - 1) <= 3 * se

    # empirical-Bernstein supermartingale, both sides, at theta0
    super_ok, super_detail = True, []
    for side, sign in ((prpi.lower_side, 1.0), (prpi.upper_side, -1.0)):
        xi = sign * h_next / (k + 1)
        cap = 1 / (k + 1)
        xi_hat = min(side.sum_xi / side.n, cap)
        lam_e = min(math.sqrt(2 * math.log(2 / ALPHA) / (side.sigma2 * (side.n + 1)
                                                         * math.log(side.n + 2))), 0.5)
        r = np.exp(lam_e * (xi - sign * theta0 * cap) - (xi - xi_hat) ** 2 * psi_E(lam_e))
        se_e = r.std(ddof=1) / math.sqrt(n_rep)
        super_ok &= r.mean() <= 1 + 3 * se_e
        super_detail.append(f"{r.mean():.4f}")
    ok = fair and super_ok
    detail = (f"hedged ratio {ratio.mean():.5f} +- {se:.5f}; "
              f"supermartingale ratios (lower, upper) {', '.join(super_detail)}")
    assert criterion(5, ok, detail)


def _eb_log_process(hs, ks, theta, sign):
    """One side of the empirical-Bernstein supermartingale, recomputed from scratch."""
    xs, sq, sig2, log_m = [], 0.0, 0.25, 0.0
    for t, (h, k) in enumerate(zip(hs, ks), 1):
        xi = sign * h / (k + 1)
        cap = 1 / (k + 1)
        xhat = min(sum(xs) / len(xs), cap) if xs else 0.0
        lam = min(math.sqrt(2 * math.log(2 / ALPHA) / (sig2 * t * math.log(1 + t))), 0.5)
        log_m += lam * (xi - sign * theta * cap) - (xi - xhat) ** 2 * (-math.log(1 - lam) - lam)
        xs.append(xi)
        sq += (xi - min(sum(xs) / t, cap)) ** 2
        sig2 = (0.25 + sq) / (t + 1)
    return log_m


def test_criterion_6_closed_form_on_ville_boundary(criterion):
    cfg = config_from_mapping(dict(dgp="bernoulli", theta0=0.1, T=400, n_iters=20, seed=66,
                                   methods=["prpi"]))
    thr = math.log(2 / ALPHA)
    worst = 0.0
    for tr in run_many(cfg, workers=WORKERS):
        cs = PrPICS(ALPHA)
        for h, k in zip(tr.h, tr.k):
            cs.update(float(h), float(k))
        lo = _eb_log_process(tr.h, tr.k, cs.raw.lower, 1.0)
        hi = _eb_log_process(tr.h, tr.k, cs.raw.upper, -1.0)
        worst = max(worst, abs(lo - thr) / thr, abs(hi - thr) / thr)
    ok = worst <= 1e-6
    assert criterion(6, ok, f"max relative gap to log(2/alpha) over 20 streams: {worst:.2e}")


def test_criterion_7_rho_optimizer(criterion):
    grid = np.exp(np.linspace(math.log(1e-4), math.log(100.0), 40001))
    rows, ok = [], True
    for sigma2 in (0.05, 0.25):
        for T in (50, 100, 1000, 5000):
            rad = np.array([asymp_radius(sigma2, T, r, ALPHA) for r in grid])
            best = float(grid[np.argmin(rad)])
            rel = abs(rho_opt(ALPHA, T) / best - 1)
            ok &= rel <= 0.05
            rows.append(f"(T={T}, s2={sigma2}) {rel:.1%}")
    assert criterion(7, ok, "relative gap rho_opt(0.05, T) vs grid minimiser: " + "; ".join(rows))


def test_criterion_8_score_bound_fuzz(criterion):
    rng = seeded_rng(88, 0)
    n = 1_000_000
    k = rng.uniform(2, 100, n)
    pi = rng.uniform(1 / k, 1 - 1 / k)
    y, f1, f0 = rng.random((3, n))
    a = rng.integers(0, 2, n)
    # pin a slice of tuples to the corners of the domain
    m = n // 10
    pi[:m] = np.where(rng.random(m) < 0.5, 1 / k[:m], 1 - 1 / k[:m])
    y[:m], f1[:m], f0[:m] = (rng.integers(0, 2, (3, m))).astype(float)
    violations, worst = 0, 0.0
    for args in zip(y.tolist(), a.tolist(), f1.tolist(), f0.tolist(), pi.tolist(), k.tolist()):
        h = score(*args[:5])
        r = abs(h) / args[5]
        if r > 1 + 1e-12:
            violations += 1
        worst = max(worst, r)
    ok = violations == 0
    assert criterion(8, ok, f"{violations} violations of |h| <= k in {n} tuples (max |h|/k {worst:.6f})")


def test_criterion_9_determinism(tmp_path, criterion):
    cfgp = tmp_path / "cfg.yaml"
    cfgp.write_text("dgp: bernoulli\ntheta0: 0.1\nT: 400\nn_iters: 3\nseed: 9\n")
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(cfgp), "--out", str(tmp_path / name), "--quiet"]) == 0
    files = ["trajectory.csv", "aggregate.csv"] + [f"streams/iter_{i:04d}.csv" for i in range(3)]
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)

    lines = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()
    round_trip = True
    for i in range(3):
        out = tmp_path / f"infer_{i}.csv"
        assert main(["infer", "--stream", str(tmp_path / "a" / "streams" / f"iter_{i:04d}.csv"),
                     "--config", str(cfgp), "--iter-id", str(i), "--out", str(out), "--quiet"]) == 0
        want = [lines[0]] + [ln for ln in lines[1:] if ln.split(",", 1)[0] == str(i)]
        round_trip &= out.read_text().splitlines() == want
    ok = same and round_trip
    assert criterion(9, ok, f"byte-identical reruns: {same}; infer round trip exact: {round_trip}")


def test_criterion_10_interval_monotonicity(bernoulli_runs, criterion):
    # the fixture already asserted inside every run; re-verify explicitly
    _, trajs = bernoulli_runs
    bad = []
    for tr in trajs:
        try:
            assert_monotone_widths(tr)
        except AssertionError as err:
            bad.append(str(err))
    ok = not bad
    assert criterion(10, ok, f"{len(trajs) - len(bad)}/{len(trajs)} runs with non-increasing "
                             "hedged/prpi/asymp widths" + (f"; first failure: {bad[0]}" if bad else ""))
