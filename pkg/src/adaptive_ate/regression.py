"""Cross-fitted outcome models for the score and the assignment policy.

Each arriving subject is assigned permanently to one of two folds.  For
every fold and arm a plug-in regressor estimates ``f(a, x) = E[Y | a, x]``
and ``e(a, x) = E[Y^2 | a, x]``.  Scores use the model of the opposite fold;
the policy averages both folds because it runs before the fold is drawn.
"""
from __future__ import annotations

from typing import Callable, Protocol

import numpy as np

from .core import ContractViolation, Observation

VFLOOR = 0.01


class PlugInRegressor(Protocol):
    def add(self, x: np.ndarray, y: float) -> None: ...

    def predict(self, x: np.ndarray) -> tuple[float, float]: ...

    def __len__(self) -> int: ...


class KNNRegressor:
    """Lazy k-nearest-neighbours regressor for ``y`` and ``y**2``.

    Points are only stored on ``add``; neighbours are searched by brute
    force at query time (Euclidean distance).  With fewer than ``k`` stored
    points all of them are averaged.
    """

    def __init__(self, k: int = 10, dim: int | None = None, capacity: int = 256):
        if k < 1:
            raise ContractViolation(f"k must be >= 1, got {k}")
        self.k = k
        self._n = 0
        self._X = None if dim is None else np.empty((capacity, dim))
        self._Y = np.empty((capacity, 2))  # columns: y, y^2

    def __len__(self) -> int:
        return self._n

    def add(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float)
        if self._X is None:
            self._X = np.empty((len(self._Y), x.shape[0]))
        if self._n == len(self._Y):
            cap = 2 * self._n
            self._X = np.resize(self._X, (cap, self._X.shape[1]))
            self._Y = np.resize(self._Y, (cap, 2))
        self._X[self._n] = x
        self._Y[self._n] = (y, y * y)
        self._n += 1

    def neighbours(self, x) -> np.ndarray:
        n = self._n
        if n == 0:
            raise ContractViolation("cannot predict from an empty regressor")
        if n <= self.k:
            return np.arange(n)
        diff = self._X[:n] - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        return np.argpartition(d2, self.k - 1)[: self.k]

    def predict(self, x) -> tuple[float, float]:
        idx = self.neighbours(np.asarray(x, dtype=float))
        f, e = self._Y[idx].sum(axis=0) / idx.size
        return float(f), float(e)


def variance_estimate(f_hat: float, e_hat: float, floor: float = VFLOOR) -> float:
    """Conditional variance ``e - f**2``, floored."""
    return max(e_hat - f_hat * f_hat, floor)


def clamp_predictions(f: float, e: float) -> tuple[float, float]:
    f = min(max(f, 0.0), 1.0)
    e = min(max(e, f * f), 1.0)
    return f, e


class SplitRegressor:
    """Two-fold sequential sample splitting around a plug-in regressor.

    Parameters
    ----------
    model_factory : callable
        Zero-argument callable returning a fresh :class:`PlugInRegressor`.
    warmup : int
        For prediction times ``t <= warmup`` the fallback predictor is used:
        arm-conditional running means (``f(1, .) = 1`` and ``f(0, .) = 0``
        before an arm has any data).
    vfloor : float
        Lower clip applied to variance estimates.
    """

    def __init__(self, model_factory: Callable[[], PlugInRegressor] | None = None,
                 warmup: int = 100, vfloor: float = VFLOOR):
        if model_factory is None:
            model_factory = KNNRegressor
        if warmup < 0:
            raise ContractViolation("warmup must be >= 0")
        self.warmup = warmup
        self.vfloor = vfloor
        self.models = [[model_factory(), model_factory()] for _ in range(2)]
        self.folds: dict[int, int] = {}
        # [fold][arm] -> count, sum y, sum y^2
        self._n = np.zeros((2, 2))
        self._s = np.zeros((2, 2))
        self._s2 = np.zeros((2, 2))
        self._version = 0
        self._cache_key = None
        self._cache = None

    # -- folds ---------------------------------------------------------
    def assign_fold(self, t: int, rng: np.random.Generator) -> int:
        if t in self.folds:
            raise ContractViolation(f"time {t} already has a fold")
        fold = int(rng.integers(2))
        self.folds[t] = fold
        return fold

    def fold_sizes(self) -> tuple[int, int]:
        n = self._n.sum(axis=1)
        return int(n[0]), int(n[1])

    # -- predictions ---------------------------------------------------
    def _fallback(self, fold: int, arm: int) -> tuple[float, float]:
        n = self._n[fold, arm]
        if n == 0:
            return (1.0, 1.0) if arm == 1 else (0.0, 0.0)
        return self._s[fold, arm] / n, self._s2[fold, arm] / n

    def _pooled_fallback(self, arm: int) -> tuple[float, float]:
        n = self._n[:, arm].sum()
        if n == 0:
            return (1.0, 1.0) if arm == 1 else (0.0, 0.0)
        return self._s[:, arm].sum() / n, self._s2[:, arm].sum() / n

    def fold_prediction(self, fold: int, arm: int, x, t: int) -> tuple[float, float]:
        """Unclamped prediction of one fold's model (fallback when warm or empty)."""
        model = self.models[fold][arm]
        if t <= self.warmup or len(model) == 0:
            return self._fallback(fold, arm)
        return model.predict(x)

    def _all_folds(self, x, t: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        key = (self._version, t, x.tobytes())
        if key != self._cache_key:
            out = np.empty((2, 2, 2))
            for fold in (0, 1):
                for arm in (0, 1):
                    out[fold, arm] = self.fold_prediction(fold, arm, x, t)
            self._cache_key, self._cache = key, out
        return self._cache

    def predict_for_score(self, x, a: int, t: int) -> tuple[float, float]:
        try:
            fold = self.folds[t]
        except KeyError:
            raise ContractViolation(f"time {t} has no fold assigned") from None
        f, e = self._all_folds(x, t)[1 - fold, a]
        return clamp_predictions(float(f), float(e))

    def predict_for_policy(self, x, a: int, t: int) -> tuple[float, float]:
        if t <= self.warmup:
            return clamp_predictions(*self._pooled_fallback(a))
        both = self._all_folds(x, t)
        f = 0.5 * (both[0, a, 0] + both[1, a, 0])
        e = 0.5 * (both[0, a, 1] + both[1, a, 1])
        return clamp_predictions(float(f), float(e))

    def variances_for_policy(self, x, t: int) -> tuple[float, float]:
        """(v1, v0) for the assignment policy."""
        v1 = variance_estimate(*self.predict_for_policy(x, 1, t), self.vfloor)
        v0 = variance_estimate(*self.predict_for_policy(x, 0, t), self.vfloor)
        return v1, v0

    # -- training ------------------------------------------------------
    def update(self, obs: Observation) -> None:
        try:
            fold = self.folds[obs.t]
        except KeyError:
            raise ContractViolation(f"time {obs.t} has no fold assigned") from None
        self.models[fold][obs.a].add(obs.x, obs.y)
        self._n[fold, obs.a] += 1
        self._s[fold, obs.a] += obs.y
        self._s2[fold, obs.a] += obs.y * obs.y
        self._version += 1


class OracleRegressor(SplitRegressor):
    """Split regressor that answers with known conditional moments.

    Folds are still drawn so random streams line up with the estimated
    variant; ``moments(a, x)`` must return ``(f, e)`` in [0, 1] units.
    """

    def __init__(self, moments: Callable[[int, np.ndarray], tuple[float, float]],
                 vfloor: float = VFLOOR):
        super().__init__(model_factory=lambda: _NullModel(), warmup=0, vfloor=vfloor)
        self.moments = moments

    def fold_prediction(self, fold, arm, x, t):
        return self.moments(arm, np.asarray(x, dtype=float))

    def predict_for_policy(self, x, a, t):
        return clamp_predictions(*self.moments(a, np.asarray(x, dtype=float)))


class _NullModel:
    def add(self, x, y):
        pass

    def predict(self, x):
        raise ContractViolation("null model has no predictions")

    def __len__(self):
        return 0
