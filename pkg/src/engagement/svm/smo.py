"""Binary linear-kernel SVM trained by Sequential Minimal Optimization.

The dual problem solved is

    maximize    W(a) = sum(a) - 1/2 * sum_ij a_i a_j y_i y_j <x_i, x_j>
    subject to  0 <= a_i <= C,  sum_i a_i y_i = 0

two multipliers at a time. Each step takes the worst KKT violator as the
first multiplier and pairs it with the sample whose error differs most from
it (the maximal violating pair); if that pair cannot move, a seeded random
sweep looks for another partner. The error cache ``E_i = f(x_i) - y_i`` is
kept without the bias, which cancels in every pair update.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_labels, check_samples

# Curvature floor for pairs of identical samples (zero second derivative).
_TAU = 1e-12
# Smallest multiplier change that counts as progress.
_MIN_STEP = 1e-12
# Relative distance to a box bound below which a multiplier is set onto it.
_SNAP = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainParams:
    c: float = 1.0
    tol: float = 1e-3
    max_passes: int = 10
    max_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class BinaryModel:
    weights: np.ndarray
    bias: float
    alphas: np.ndarray
    support_indices: np.ndarray
    train_meta: dict = field(default_factory=dict)

    def decision_values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights + self.bias

    def __eq__(self, other):
        if not isinstance(other, BinaryModel):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and self.bias == other.bias
            and np.array_equal(self.alphas, other.alphas)
            and np.array_equal(self.support_indices, other.support_indices)
            and self.train_meta == other.train_meta
        )

    __hash__ = None


def dual_objective(alphas, X, y) -> float:
    alphas = np.asarray(alphas, dtype=float)
    y = np.asarray(y, dtype=float)
    v = (alphas * y) @ np.asarray(X, dtype=float)
    return float(alphas.sum() - 0.5 * v @ v)


def kkt_violations(model: BinaryModel, X, y, tol: float) -> np.ndarray:
    """Indices of samples whose KKT condition fails by more than ``tol``."""
    y = np.asarray(y, dtype=float)
    margin = y * model.decision_values(X)
    c = model.train_meta["params"]["c"]
    a = model.alphas
    at_zero = a <= 0
    at_c = a >= c
    free = ~at_zero & ~at_c
    bad = (at_zero & (margin < 1 - tol)) | (free & (np.abs(margin - 1) > tol)) | (at_c & (margin > 1 + tol))
    return np.flatnonzero(bad)


class _Solver:
    def __init__(self, X, y, params: TrainParams, debug: bool, trace):
        self.X = X
        self.y = y
        self.c = params.c
        self.params = params
        self.K = X @ X.T
        self.alpha = np.zeros(len(y))
        self.E = -y.copy()
        self.rng = np.random.default_rng(params.seed)
        self.debug = debug
        self.trace = trace
        self.objective = 0.0

    def _index_sets(self):
        y, a, c = self.y, self.alpha, self.c
        up = ((y > 0) & (a < c)) | ((y < 0) & (a > 0))
        low = ((y > 0) & (a > 0)) | ((y < 0) & (a < c))
        return up, low

    def _current_objective(self):
        return float(self.alpha.sum() - 0.5 * np.dot(self.alpha * self.y, self.E + self.y))

    def _snap(self, value: float) -> float:
        # Round-off can leave a multiplier a few ulps inside its box; such a
        # residual would keep it in the wrong index set forever.
        eps = _SNAP * self.c
        if value < eps:
            return 0.0
        if value > self.c - eps:
            return self.c
        return value

    def take_step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        y, a, c, K = self.y, self.alpha, self.c, self.K
        ai, aj = a[i], a[j]
        if y[i] != y[j]:
            lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
        if hi - lo < _MIN_STEP:
            return False
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
        aj_new = min(hi, max(lo, aj + y[j] * (self.E[i] - self.E[j]) / eta))
        if abs(aj_new - aj) < _MIN_STEP:
            return False
        ai_new = ai + y[i] * y[j] * (aj - aj_new)
        ai_new, aj_new = self._snap(ai_new), self._snap(aj_new)
        di, dj = ai_new - ai, aj_new - aj
        a[i], a[j] = ai_new, aj_new
        self.E += K[:, i] * (y[i] * di) + K[:, j] * (y[j] * dj)

        if self.debug or self.trace is not None:
            obj = self._current_objective()
            if self.debug:
                slack = 1e-12 * max(1.0, abs(self.objective))
                assert obj >= self.objective - slack, (
                    f"dual objective decreased: {self.objective!r} -> {obj!r}"
                )
                balance = float(np.dot(self.alpha, self.y))
                assert abs(balance) <= 1e-9, f"equality constraint drifted: {balance!r}"
            if self.trace is not None:
                self.trace.append(obj)
            self.objective = obj
        return True

    def _fallback_sweep(self, up, low, first):
        """Random partner sweep for ``first``, then for every other violator."""
        score = -self.E
        for j in self.rng.permutation(np.flatnonzero(low & (score < score[first] - self.params.tol))):
            if self.take_step(first, int(j)):
                return True
        lowest = np.min(np.where(low, score, np.inf))
        for i in self.rng.permutation(np.flatnonzero(up & (score > lowest + self.params.tol))):
            if i == first:
                continue
            for j in self.rng.permutation(np.flatnonzero(low & (score < score[i] - self.params.tol))):
                if self.take_step(int(i), int(j)):
                    return True
        return False

    def run(self):
        params = self.params
        iterations = 0
        stalled_passes = 0
        converged = False
        while iterations < params.max_iterations:
            up, low = self._index_sets()
            if not up.any() or not low.any():
                converged = True
                break
            score = -self.E
            i = int(np.argmax(np.where(up, score, -np.inf)))
            j = int(np.argmin(np.where(low, score, np.inf)))
            if score[i] - score[j] <= params.tol:
                converged = True
                break
            if self.take_step(i, j) or self._fallback_sweep(up, low, i):
                iterations += 1
                stalled_passes = 0
                continue
            stalled_passes += 1
            if stalled_passes >= params.max_passes:
                break
        return iterations, converged

    def bias(self) -> float:
        a, c = self.alpha, self.c
        free = (a > 0) & (a < c)
        if free.any():
            return float(np.mean(-self.E[free]))
        up, low = self._index_sets()
        score = -self.E
        hi = np.max(score[up]) if up.any() else np.min(score[low])
        lo = np.min(score[low]) if low.any() else np.max(score[up])
        return float(0.5 * (hi + lo))


def train_binary(samples, labels, params: TrainParams | None = None, *, debug=False, objective_trace=None) -> BinaryModel:
    """Train a linear SVM on ``labels`` in {-1, +1}.

    Parameters
    ----------
    samples : array-like of shape (n_samples, n_features)
    labels : array-like of shape (n_samples,)
    params : TrainParams, optional
    debug : bool, default False
        Assert after every accepted update that the dual objective did not
        decrease and that ``sum(alpha * y)`` stayed at zero.
    objective_trace : list, optional
        If given, the dual objective after each accepted update is appended.
    """
    params = params or TrainParams()
    X = check_samples(samples)
    y = check_binary_labels(labels, len(X))

    solver = _Solver(X, y, params, debug, objective_trace)
    iterations, converged = solver.run()
    if not converged:
        warnings.warn(
            f"SMO stopped after {iterations} updates without reaching tol={params.tol}",
            ConvergenceWarning,
            stacklevel=2,
        )
    alphas = solver.alpha.copy()
    weights = (alphas * y) @ X
    support = np.flatnonzero(alphas > 0)
    meta = {
        "params": params.to_dict(),
        "n_samples": int(len(y)),
        "iterations": int(iterations),
        "converged": bool(converged),
    }
    return BinaryModel(weights, solver.bias(), alphas, support, meta)


def decision_value(model: BinaryModel, x) -> float:
    x = np.asarray(getattr(x, "bits", x), dtype=float)
    if x.shape != model.weights.shape:
        raise ValueError(f"feature dimension {x.shape} does not match model {model.weights.shape}")
    return float(x @ model.weights + model.bias)


class SMOClassifier(ClassifierMixin, BaseEstimator):
    """Binary linear SVM with an sklearn interface.

    Parameters
    ----------
    C : float, default 1.0
    tol : float, default 1e-3
    max_passes : int, default 10
    max_iter : int, default 100000
    random_state : int, default 0
        Seed for the fallback partner sweep.
    """

    def __init__(self, C=1.0, tol=1e-3, max_passes=10, max_iter=100_000, random_state=0):
        self.C = C
        self.tol = tol
        self.max_passes = max_passes
        self.max_iter = max_iter
        self.random_state = random_state

    def _params(self) -> TrainParams:
        return TrainParams(self.C, self.tol, self.max_passes, self.max_iter, int(self.random_state or 0))

    def fit(self, X, y):
        X = check_samples(X)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError(f"SMOClassifier needs exactly 2 classes, got {len(self.classes_)}")
        signed = np.where(y == self.classes_[1], 1.0, -1.0)
        self.model_ = train_binary(X, signed, self._params())
        self.coef_ = self.model_.weights[np.newaxis, :]
        self.intercept_ = np.array([self.model_.bias])
        self.support_ = self.model_.support_indices
        self.dual_coef_ = (self.model_.alphas * signed)[self.support_][np.newaxis, :]
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_samples(X, n_features=self.n_features_in_)
        return self.model_.decision_values(X)

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
