"""One-vs-rest wrapper turning binary SMO models into an engagement-state classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_samples, check_states
from ..states import EngagementState
from .smo import BinaryModel, TrainParams, train_binary


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    class_labels: tuple
    binaries: tuple
    thresholds_fingerprint: str = ""

    def __post_init__(self):
        if len(self.class_labels) < 2 or len(self.binaries) != len(self.class_labels):
            raise ValueError("a multiclass model needs one binary model per class and at least 2 classes")
        dims = {len(b.weights) for b in self.binaries}
        if len(dims) != 1:
            raise ValueError("binary models disagree on feature dimension")

    @property
    def n_features(self) -> int:
        return len(self.binaries[0].weights)

    @property
    def coef(self) -> np.ndarray:
        return np.stack([b.weights for b in self.binaries])

    @property
    def intercept(self) -> np.ndarray:
        return np.array([b.bias for b in self.binaries])

    def decision_values(self, X) -> np.ndarray:
        """Per-class decision values, shape (n_samples, n_classes)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected samples with {self.n_features} features, got shape {X.shape}")
        return X @ self.coef.T + self.intercept

    def predict_states(self, X) -> np.ndarray:
        # argmax returns the first maximum; labels are ascending so ties go to the lower state.
        return np.asarray(self.class_labels)[np.argmax(self.decision_values(X), axis=1)]

    def __eq__(self, other):
        if not isinstance(other, MulticlassModel):
            return NotImplemented
        return (
            tuple(self.class_labels) == tuple(other.class_labels)
            and self.thresholds_fingerprint == other.thresholds_fingerprint
            and all(a == b for a, b in zip(self.binaries, other.binaries))
        )

    __hash__ = None


def train_multiclass(dataset, params: TrainParams | None = None, thresholds_fingerprint: str = "") -> MulticlassModel:
    """Train one binary SMO model per state present in ``dataset``.

    ``dataset`` is a sequence of ``(feature_vector, state)`` pairs. The binary
    model for the k-th class (ascending state order) uses seed ``seed + k``.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty dataset")
    X = check_samples([getattr(x, "bits", x) for x, _ in dataset])
    y = check_states([int(s) for _, s in dataset])
    return _train_arrays(X, y, params or TrainParams(), thresholds_fingerprint)


def _train_arrays(X, y, params: TrainParams, fingerprint: str) -> MulticlassModel:
    labels = sorted(set(int(v) for v in y))
    if len(labels) < 2:
        raise ValueError(f"need at least 2 distinct states, got {labels}")
    binaries = []
    for k, label in enumerate(labels):
        p = TrainParams(params.c, params.tol, params.max_passes, params.max_iterations, params.seed + k)
        binaries.append(train_binary(X, np.where(y == label, 1.0, -1.0), p))
    return MulticlassModel(tuple(labels), tuple(binaries), fingerprint)


def predict(model: MulticlassModel, x):
    """Return ``(EngagementState, per-class decision values)`` for one feature vector."""
    x = np.asarray(getattr(x, "bits", x), dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected {model.n_features} features, got shape {x.shape}")
    values = model.decision_values(x[np.newaxis, :])[0]
    return EngagementState(model.class_labels[int(np.argmax(values))]), values


class OneVsRestSMO(ClassifierMixin, BaseEstimator):
    """sklearn front end for :func:`train_multiclass`; ``y`` holds states 1-6."""

    def __init__(self, C=1.0, tol=1e-3, max_passes=10, max_iter=100_000, random_state=0, thresholds_fingerprint=""):
        self.C = C
        self.tol = tol
        self.max_passes = max_passes
        self.max_iter = max_iter
        self.random_state = random_state
        self.thresholds_fingerprint = thresholds_fingerprint

    def fit(self, X, y):
        X = check_samples(X)
        y = check_states(y)
        if len(y) != len(X):
            raise ValueError(f"length mismatch: {len(X)} samples but {len(y)} labels")
        params = TrainParams(self.C, self.tol, self.max_passes, self.max_iter, int(self.random_state or 0))
        self.model_ = _train_arrays(X, y, params, self.thresholds_fingerprint)
        self.classes_ = np.asarray(self.model_.class_labels)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_values(check_samples(X, n_features=self.n_features_in_))

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict_states(check_samples(X, n_features=self.n_features_in_))
