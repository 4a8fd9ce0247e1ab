"""Declarative experiment configuration.

A config is a nested key/value mapping (JSON or YAML on disk).  Only
``dgp`` is required when simulating; everything else has defaults that
follow the reference protocol (T=5000, alpha=0.05, inference from t=50,
kNN with k=10, warmup 100, geometric truncation from k=2 with decay 0.999).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..core import ConfigError, OutcomeRange, TruncationSchedule

METHODS = ("clt", "hedged", "prpi", "asymp")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "knn"
    k: int = 10
    warmup: int = 100
    vfloor: float = 0.01


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "a2ipw"
    p: float = 0.5
    warmup: int | None = None
    schedule: TruncationSchedule = field(default_factory=TruncationSchedule)


@dataclass(frozen=True)
class ConfSeqConfig:
    rho: float = 0.5
    grid_size: int = 1000
    c: float = 0.5
    m: float = 0.5
    sigma0_sq: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: str | None = None
    theta0: float | None = None
    T: int = 5000
    n_iters: int = 200
    alpha: float = 0.05
    seed: int = 0
    t_min: int = 50
    methods: tuple[str, ...] = METHODS
    workers: int = 1
    outcome_range: OutcomeRange | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    confseq: ConfSeqConfig = field(default_factory=ConfSeqConfig)
    write_trajectories: bool = True
    write_streams: bool = True

    @property
    def policy_warmup(self) -> int:
        return self.model.warmup if self.policy.warmup is None else self.policy.warmup

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def validate(self, require_dgp: bool = True) -> "ExperimentConfig":
        if require_dgp and self.dgp is None:
            raise ConfigError("missing required key 'dgp'")
        if self.dgp is not None:
            from .dgp import make_dgp
            make_dgp(self.dgp, self.theta0)
        _check(self.T >= 1, "T", "must be >= 1")
        _check(self.n_iters >= 1, "n_iters", "must be >= 1")
        _check(0 < self.alpha < 1, "alpha", "must lie in (0, 1)")
        _check(self.t_min >= 1, "t_min", "must be >= 1")
        _check(self.workers >= 1, "workers", "must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        _check(not bad and len(self.methods) > 0, "methods", f"expected a non-empty subset of {METHODS}")
        _check(self.model.kind in ("knn", "oracle"), "model.kind", "expected 'knn' or 'oracle'")
        _check(self.model.k >= 1, "model.k", "must be >= 1")
        _check(self.model.warmup >= 0, "model.warmup", "must be >= 0")
        _check(self.model.vfloor > 0, "model.vfloor", "must be > 0")
        _check(self.policy.kind in ("a2ipw", "fixed", "oracle-aipw"), "policy.kind",
               "expected 'a2ipw', 'fixed' or 'oracle-aipw'")
        _check(0 < self.policy.p < 1, "policy.p", "must lie in (0, 1)")
        _check(self.confseq.rho > 0, "confseq.rho", "must be > 0")
        _check(self.confseq.grid_size >= 3, "confseq.grid_size", "must be >= 3")
        _check(0 < self.confseq.c < 1, "confseq.c", "must lie in (0, 1)")
        _check(0 <= self.confseq.m <= 1, "confseq.m", "must lie in [0, 1]")
        _check(self.confseq.sigma0_sq > 0, "confseq.sigma0_sq", "must be > 0")
        if self.dgp is None:
            _check(self.model.kind != "oracle", "model.kind", "'oracle' needs a dgp")
            _check(self.policy.kind != "oracle-aipw", "policy.kind", "'oracle-aipw' needs a dgp")
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        return d


def _check(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"{key}: {msg}")


def _build(cls, data: Mapping[str, Any], prefix: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}: unknown key")
    return names


def _num(value, key, typ):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if typ is int:
        if float(value) != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _schedule(data) -> TruncationSchedule:
    if isinstance(data, TruncationSchedule):
        return data
    if not isinstance(data, Mapping):
        raise ConfigError("policy.schedule: expected a mapping")
    data = dict(data)
    if "pi_min" in data:
        pi_min = _num(data.pop("pi_min"), "policy.schedule.pi_min", float)
        if data:
            raise ConfigError(f"policy.schedule.{sorted(data)[0]}: not allowed together with pi_min")
        return TruncationSchedule.from_pi_min(pi_min)
    _build(TruncationSchedule, data, "policy.schedule.")
    kw = {}
    if "kind" in data:
        kw["kind"] = str(data["kind"])
    for key in ("k1", "decay"):
        if key in data:
            kw[key] = _num(data[key], f"policy.schedule.{key}", float)
    if kw.get("kind") == "constant":
        kw.setdefault("decay", 1.0)
    try:
        return TruncationSchedule(**kw)
    except ConfigError as err:
        raise ConfigError(f"policy.schedule: {err}") from None


def config_from_mapping(data: Mapping[str, Any], require_dgp: bool = True) -> ExperimentConfig:
    names = _build(ExperimentConfig, data, "")
    kw: dict[str, Any] = {}
    for key, value in data.items():
        if key in ("model", "confseq"):
            sub_cls = ModelConfig if key == "model" else ConfSeqConfig
            sub_fields = _build(sub_cls, value, f"{key}.")
            sub = {}
            for k, v in value.items():
                if k == "kind":
                    sub[k] = str(v)
                else:
                    typ = int if sub_fields[k].type in ("int",) else float
                    sub[k] = _num(v, f"{key}.{k}", typ)
            kw[key] = sub_cls(**sub)
        elif key == "policy":
            _build(PolicyConfig, value, "policy.")
            sub = {}
            for k, v in value.items():
                if k == "kind":
                    sub[k] = str(v)
                elif k == "schedule":
                    sub[k] = _schedule(v)
                elif k == "warmup":
                    sub[k] = None if v is None else _num(v, "policy.warmup", int)
                else:
                    sub[k] = _num(v, f"policy.{k}", float)
            kw[key] = PolicyConfig(**sub)
        elif key == "outcome_range":
            if isinstance(value, Mapping):
                lo, hi = value.get("lo"), value.get("hi")
            else:
                try:
                    lo, hi = value
                except (TypeError, ValueError):
                    raise ConfigError("outcome_range: expected {lo, hi} or [lo, hi]") from None
            try:
                kw[key] = OutcomeRange(_num(lo, "outcome_range.lo", float),
                                       _num(hi, "outcome_range.hi", float))
            except ConfigError as err:
                raise ConfigError(f"outcome_range: {err}") from None
        elif key == "methods":
            if isinstance(value, str):
                value = [m.strip() for m in value.split(",") if m.strip()]
            kw[key] = tuple(str(m) for m in value)
        elif key == "dgp":
            kw[key] = None if value is None else str(value)
        elif key in ("write_trajectories", "write_streams"):
            if not isinstance(value, bool):
                raise ConfigError(f"{key}: expected true/false")
            kw[key] = value
        elif key == "theta0":
            kw[key] = None if value is None else _num(value, key, float)
        else:
            typ = int if names[key].type in ("int",) else float
            kw[key] = _num(value, key, typ)
    return ExperimentConfig(**kw).validate(require_dgp=require_dgp)


def load_config(path: str | Path, require_dgp: bool = True) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    except Exception as err:  # parser-specific exception types
        raise ConfigError(f"cannot parse config {path}: {err}") from None
    return config_from_mapping(data, require_dgp=require_dgp)
