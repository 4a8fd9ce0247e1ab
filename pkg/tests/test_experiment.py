import io
import math

import numpy as np
import pytest

from adaptive_ate.core import ConfigError, DataValidationError
from adaptive_ate.sim.aggregate import aggregate, aggregate_arrays, cumulative_fraction
from adaptive_ate.sim.config import ExperimentConfig, config_from_mapping, load_config
from adaptive_ate.sim.experiment import (
    assert_monotone_widths,
    mean_estimate_error,
    run_experiment,
    run_many,
)
from adaptive_ate.sim.io import read_stream, write_trajectories


def cfg(**kw):
    base = dict(dgp="bernoulli", theta0=0.1, T=300, n_iters=2, seed=3)
    base.update(kw)
    return config_from_mapping(base)


# config -------------------------------------------------------------------

def test_config_defaults():
    c = cfg()
    assert c.alpha == 0.05 and c.t_min == 50 and c.model.k == 10 and c.model.warmup == 100
    assert c.policy.schedule.kind == "geometric" and c.policy.schedule.decay == 0.999
    assert c.methods == ("clt", "hedged", "prpi", "asymp")


@pytest.mark.parametrize("data,key", [
    ({"T": 10}, "dgp"),
    ({"dgp": "bernoulli", "alpha": 1.5}, "alpha"),
    ({"dgp": "bernoulli", "T": "many"}, "T"),
    ({"dgp": "bernoulli", "modle": {}}, "modle"),
    ({"dgp": "bernoulli", "model": {"k": 0}}, "model.k"),
    ({"dgp": "bernoulli", "methods": ["clt", "bogus"]}, "methods"),
    ({"dgp": "bernoulli", "policy": {"schedule": {"pi_min": 0.7}}}, "pi_min"),
    ({"dgp": "coin"}, "dgp"),
])
def test_config_errors_name_the_field(data, key):
    with pytest.raises(ConfigError, match=key):
        config_from_mapping(data)


def test_config_schedule_and_range_forms():
    c = config_from_mapping({"dgp": "truncation_study", "policy": {
        "kind": "oracle-aipw", "schedule": {"pi_min": 0.2}}, "outcome_range": [0, 1],
        "methods": "prpi, clt"})
    assert c.policy.schedule.kind == "constant" and c.policy.schedule.k1 == pytest.approx(5.0)
    assert c.outcome_range.scale == 1.0
    assert c.methods == ("prpi", "clt")


def test_load_config_yaml_and_json(tmp_path):
    (tmp_path / "c.yaml").write_text("dgp: bounded\ntheta0: 0.4\nT: 100\n")
    (tmp_path / "c.json").write_text('{"dgp": "bounded", "theta0": 0.4, "T": 100}')
    assert load_config(tmp_path / "c.yaml") == load_config(tmp_path / "c.json")
    (tmp_path / "bad.yaml").write_text("dgp: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")


# run_experiment -----------------------------------------------------------

def _csv(trajs):
    buf = io.StringIO()
    write_trajectories(trajs, buf)
    return buf.getvalue()


def test_run_is_deterministic():
    c = cfg()
    a, b = run_experiment(c, 1), run_experiment(c, 1)
    assert _csv([a]) == _csv([b])
    assert _csv([a]) != _csv([run_experiment(c, 2)])


def test_methods_do_not_change_the_random_path():
    full = run_experiment(cfg(), 0)
    clt = run_experiment(cfg(methods=["clt"]), 0)
    assert np.array_equal(full.h, clt.h) and np.array_equal(full.lower["clt"], clt.lower["clt"])


def test_warmup_assignments_are_half():
    tr = run_experiment(cfg(T=250), 0)
    assert np.all(tr.pi1[:100] == 0.5)
    assert np.any(tr.pi1[100:] != 0.5)
    assert np.all((tr.pi1 >= 1 / tr.k - 1e-15) & (tr.pi1 <= 1 - 1 / tr.k + 1e-15))


def test_fixed_policy_oracle_mean_converges():
    c = cfg(T=5000, methods=["clt"], model={"kind": "oracle"}, policy={"kind": "fixed"})
    tr = run_experiment(c, 0)
    sigma = tr.h.std() * tr.scale
    assert mean_estimate_error(tr) < 4 * sigma / math.sqrt(tr.T)


def test_full_range_before_t_min_and_monotone():
    tr = run_experiment(cfg(T=400), 0, check_monotone=True)
    for m in tr.methods:
        assert np.all(tr.lower[m][:49] == -tr.scale) and np.all(tr.upper[m][:49] == tr.scale)
        assert tr.width(m)[49] < 2 * tr.scale
    assert tr.diagnostics["hedged_gaps"] == 0


def test_monotone_check_detects_growth():
    tr = run_experiment(cfg(T=120, methods=["prpi"]), 0)
    tr.upper["prpi"][-1] += 0.5
    with pytest.raises(AssertionError, match="prpi"):
        assert_monotone_widths(tr)


def test_bounded_dgp_intervals_in_raw_units():
    tr = run_experiment(cfg(dgp="bounded", theta0=0.1, T=600), 0)
    assert tr.scale == pytest.approx(0.55)
    assert tr.lower["hedged"][0] == pytest.approx(-0.55)
    for m in tr.methods:
        assert tr.covers(m, 0.1)[-1]


def test_run_many_parallel_matches_serial():
    c = cfg(T=150, n_iters=3, methods=["clt", "prpi"])
    serial = run_many(c, workers=1)
    parallel = run_many(c, workers=2)
    assert _csv(serial) == _csv(parallel)


# aggregate ----------------------------------------------------------------

def test_aggregate_full_range_is_zero():
    n, T = 4, 100
    z = np.zeros((n, T), dtype=bool)
    res = aggregate_arrays({"x": ~z}, {"x": z}, {"x": np.full((n, T), 2.0)}, t_min=50)
    assert np.all(res.cum_miscoverage["x"] == 0) and np.all(res.cum_power["x"] == 0)
    assert np.all(res.mean_width["x"] == 2.0)


def test_aggregate_single_exclusion_steps():
    covered = np.ones((1, 100), dtype=bool)
    covered[0, 59] = False  # s = 60
    curve = cumulative_fraction(~covered, t_min=50)
    assert np.all(curve[:59] == 0) and np.all(curve[59:] == 1)


def test_aggregate_ignores_exclusions_before_t_min():
    covered = np.ones((2, 80), dtype=bool)
    covered[0, 10] = False
    covered[1, 70] = False
    curve = cumulative_fraction(~covered, t_min=50)
    assert curve[-1] == 0.5


def test_aggregate_is_order_independent():
    trajs = run_many(cfg(T=120, n_iters=4, methods=["clt", "asymp"]))
    a, b = aggregate(trajs), aggregate(trajs[::-1])
    for m in a.methods:
        assert np.array_equal(a.cum_miscoverage[m], b.cum_miscoverage[m])
        assert np.array_equal(a.mean_width[m], b.mean_width[m])


def test_aggregate_needs_an_iteration():
    with pytest.raises(ValueError):
        aggregate([])


# stream parsing -----------------------------------------------------------

HEADER = "t,x1,x2,a,y,pi1,k\n"


@pytest.mark.parametrize("rows,needle", [
    ("2,0,0,1,0.5,0.5,2\n1,0,0,1,0.5,0.5,2\n", "not increasing"),
    ("1,0,0,1,0.5,0.9,5\n", "pi1=0.9"),
    ("1,0,0,2,0.5,0.5,2\n", "arm"),
    ("1,0,0,1,0.5,0.5,1.5\n", "k=1.5"),
    ("1,0,zz,1,0.5,0.5,2\n", "cannot parse"),
])
def test_read_stream_rejects(rows, needle):
    with pytest.raises(DataValidationError, match=needle) as err:
        list(read_stream(io.StringIO(HEADER + rows)))
    assert "row " in str(err.value)


def test_read_stream_accepts_boundary_propensity():
    rows = list(read_stream(io.StringIO(HEADER + "1,0.1,0.2,1,0.5,0.2,5\n3,0,0,0,1,0.8,5\n")))
    assert [r[0] for r in rows] == [1, 3]
    assert np.array_equal(rows[0][1], [0.1, 0.2])
