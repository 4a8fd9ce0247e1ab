"""CSV formats.

trajectory: iter, t, method, lower, upper, width, covered, rejects_zero, h, pi1, k
aggregate:  method, t, cum_miscoverage, cum_power, mean_width
stream:     t, x1..xd, a, y, pi1, k   (full float precision, replayable by ``infer``)

Intervals are in raw outcome units, ``h`` in [0, 1]-rescaled units.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterator, TextIO

import numpy as np

from ..core import DataValidationError, Interval
from .aggregate import AggregateResult, aggregate_arrays

TRAJECTORY_HEADER = ["iter", "t", "method", "lower", "upper", "width", "covered",
                     "rejects_zero", "h", "pi1", "k"]
AGGREGATE_HEADER = ["method", "t", "cum_miscoverage", "cum_power", "mean_width"]


def fmt(v: float) -> str:
    return "%.12g" % v


def trajectory_row(iter_id: int, t: int, method: str, iv: Interval, theta0: float | None,
                   h: float, pi1: float, k: float) -> list[str]:
    covered = "" if theta0 is None else str(int(iv.contains(theta0)))
    return [str(iter_id), str(t), method, fmt(iv.lower), fmt(iv.upper), fmt(iv.width),
            covered, str(int(not iv.contains(0.0))), fmt(h), fmt(pi1), fmt(k)]


def write_trajectories(trajectories, fh: TextIO, header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(TRAJECTORY_HEADER)
    for tr in trajectories:
        for i in range(tr.T):
            for m in tr.methods:
                iv = Interval(float(tr.lower[m][i]), float(tr.upper[m][i]), bool(tr.empty[m][i]))
                w.writerow(trajectory_row(tr.iter_id, i + 1, m, iv, tr.theta0,
                                          tr.h[i], tr.pi1[i], tr.k[i]))


def write_stream(tr, path: Path) -> None:
    d = tr.x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *[f"x{j + 1}" for j in range(d)], "a", "y", "pi1", "k"])
        for i in range(tr.T):
            w.writerow([i + 1, *map(repr, map(float, tr.x[i])), int(tr.a[i]),
                        repr(float(tr.y[i])), repr(float(tr.pi1[i])), repr(float(tr.k[i]))])


def write_aggregate(res: AggregateResult, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for m in res.methods:
        for i in range(res.T):
            w.writerow([m, i + 1, fmt(res.cum_miscoverage[m][i]), fmt(res.cum_power[m][i]),
                        fmt(res.mean_width[m][i])])


def read_stream(fh: TextIO) -> Iterator[tuple[int, np.ndarray, int, float, float, float]]:
    """Yield validated (t, x, a, y, pi1, k) rows one at a time."""
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataValidationError("stream is empty") from None
    header = [c.strip() for c in header]
    need = ["t", "a", "y", "pi1", "k"]
    missing = [c for c in need if c not in header]
    if missing:
        raise DataValidationError(f"stream header lacks column(s) {missing}")
    xcols = [i for i, c in enumerate(header) if c.startswith("x")]
    if not xcols:
        raise DataValidationError("stream header has no context columns (x1, x2, ...)")
    pos = {c: header.index(c) for c in need}
    prev_t = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            t = int(row[pos["t"]])
            x = np.array([float(row[i]) for i in xcols])
            a = int(row[pos["a"]])
            y, pi1, k = (float(row[pos[c]]) for c in ("y", "pi1", "k"))
        except (ValueError, IndexError) as err:
            raise DataValidationError(f"row {lineno}: cannot parse ({err})") from None
        if t <= prev_t:
            raise DataValidationError(f"row {lineno}: t={t} is not increasing (previous {prev_t})")
        if a not in (0, 1):
            raise DataValidationError(f"row {lineno}: arm must be 0 or 1, got {a}")
        if not (math.isfinite(k) and k >= 2):
            raise DataValidationError(f"row {lineno}: truncation level k={k} must be >= 2")
        tol = 1e-12
        if not (1.0 / k - tol <= pi1 <= 1.0 - 1.0 / k + tol) or not 0 < pi1 < 1:
            raise DataValidationError(
                f"row {lineno}: pi1={pi1} outside [1/k, 1-1/k] for k={k}")
        if not (np.all(np.isfinite(x)) and math.isfinite(y)):
            raise DataValidationError(f"row {lineno}: non-finite value")
        prev_t = t
        yield t, x, a, y, pi1, k


def read_trajectories(paths) -> tuple[AggregateResult, dict]:
    """Aggregate trajectory CSV files; returns the result and per-iteration diagnostics."""
    rows: dict[tuple[int, str], list[tuple[int, bool, bool, float]]] = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for r in reader:
                cov = r["covered"]
                if cov == "":
                    raise DataValidationError(f"{path}: covered column is empty (true effect unknown)")
                rows.setdefault((int(r["iter"]), r["method"]), []).append(
                    (int(r["t"]), cov == "1", r["rejects_zero"] == "1", float(r["width"])))
    if not rows:
        raise DataValidationError("no trajectory rows found")
    iters = sorted({i for i, _ in rows})
    methods = list(dict.fromkeys(m for _, m in rows))
    covered, rejects, widths = {}, {}, {}
    T = None
    for m in methods:
        cov_m, rej_m, wid_m = [], [], []
        for i in iters:
            seq = sorted(rows.get((i, m), []))
            if T is None:
                T = len(seq)
            if len(seq) != T or [s[0] for s in seq] != list(range(1, T + 1)):
                raise DataValidationError(f"iteration {i}, method {m}: incomplete time index")
            cov_m.append([s[1] for s in seq])
            rej_m.append([s[2] for s in seq])
            wid_m.append([s[3] for s in seq])
        covered[m], rejects[m], widths[m] = np.array(cov_m), np.array(rej_m), np.array(wid_m)
    # rows before t_min are full-range intervals, which neither miss nor reject
    return aggregate_arrays(covered, rejects, widths, t_min=1), {"iters": iters}
