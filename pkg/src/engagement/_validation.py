"""Input checks shared by the estimators and the functional API."""
import numpy as np
from sklearn.utils import check_array


def check_samples(X, n_features=None) -> np.ndarray:
    """2-D finite float array with at least one row (and a fixed width if given)."""
    if hasattr(X, "__len__") and len(X) == 0:
        raise ValueError("empty input: no samples")
    if hasattr(X, "__len__") and hasattr(X[0], "bits"):
        X = [x.bits for x in X]
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=1)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_binary_labels(labels, n_samples: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(y) != n_samples:
        raise ValueError(f"length mismatch: {n_samples} samples but {len(y)} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("single-class input: both -1 and +1 labels are required")
    return y


def check_states(states, allowed=range(1, 7)) -> np.ndarray:
    s = np.asarray(states, dtype=np.int64).reshape(-1)
    bad = ~np.isin(s, list(allowed))
    if bad.any():
        raise ValueError(f"engagement state {int(s[bad][0])} outside {sorted(allowed)}")
    return s
