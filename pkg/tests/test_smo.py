import itertools
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings as hsettings, strategies as st
from sklearn.base import clone
from sklearn.svm import SVC

from engagement.svm import (
    BinaryModel,
    SMOClassifier,
    TrainParams,
    decision_value,
    dual_objective,
    kkt_violations,
    train_binary,
)

HARD = TrainParams(c=1000.0)


def _unit(k, n=16, value=1.0):
    x = np.zeros(n)
    x[k] = value
    return x


def separable_instance(rng, max_n=20, dim=16):
    n = int(rng.integers(2, max_n + 1))
    while True:
        X = rng.integers(0, 2, (n, dim)).astype(float)
        w, b = rng.normal(size=dim), rng.normal()
        s = X @ w + b
        y = np.where(s > 0, 1.0, -1.0)
        if len(set(y)) == 2 and np.min(np.abs(s)) > 1e-3:
            return X, y


def assert_model_invariants(model, X, y):
    c = model.train_meta["params"]["c"]
    assert np.all(model.alphas >= 0) and np.all(model.alphas <= c)
    assert abs(np.dot(model.alphas, y)) <= 1e-6
    np.testing.assert_allclose(model.weights, (model.alphas * y) @ X, atol=1e-9, rtol=0)
    np.testing.assert_array_equal(model.support_indices, np.flatnonzero(model.alphas > 0))


def test_two_point_closed_form():
    X = np.array([_unit(0, value=-1.0), _unit(0)])
    y = np.array([-1.0, 1.0])
    model = train_binary(X, y, TrainParams(c=1.0))
    np.testing.assert_allclose(model.weights, _unit(0), atol=1e-6)
    assert model.bias == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(model.alphas, [0.5, 0.5], atol=1e-6)
    assert decision_value(model, X[0]) == pytest.approx(-1.0, abs=1e-6)


def test_decision_value_examples():
    zero = BinaryModel(np.zeros(16), 0.7, np.zeros(0), np.zeros(0, dtype=int))
    assert decision_value(zero, np.ones(16)) == pytest.approx(0.7)
    unit = BinaryModel(_unit(0), 0.0, np.zeros(0), np.zeros(0, dtype=int))
    assert decision_value(unit, _unit(0)) == 1.0
    with pytest.raises(ValueError, match="dimension"):
        decision_value(unit, np.ones(3))


def test_random_separable_instances_fit_exactly():
    rng = np.random.default_rng(100)
    for _ in range(100):
        X, y = separable_instance(rng)
        model = train_binary(X, y, HARD)
        assert np.all(np.sign(model.decision_values(X)) == y)
        assert model.train_meta["converged"]
        assert_model_invariants(model, X, y)
        assert len(kkt_violations(model, X, y, HARD.tol)) == 0


def test_default_c_matches_libsvm_optimum():
    # At c=1 a separable set may legitimately keep a training error; libsvm
    # serves as the oracle for the soft-margin optimum itself.
    rng = np.random.default_rng(101)
    for _ in range(100):
        X, y = separable_instance(rng)
        model = train_binary(X, y, TrainParams(c=1.0, tol=1e-6))
        ref = SVC(kernel="linear", C=1.0, tol=1e-8).fit(X, y)
        ref_alpha = np.zeros(len(y))
        ref_alpha[ref.support_] = np.abs(ref.dual_coef_[0])
        ours, theirs = dual_objective(model.alphas, X, y), dual_objective(ref_alpha, X, y)
        assert ours >= theirs - 1e-5
        np.testing.assert_allclose(model.weights, ref.coef_[0], atol=1e-3)
        np.testing.assert_array_equal(np.sign(model.decision_values(X)), np.sign(ref.decision_function(X)))


def grid_margin_oracle(P, y, steps=20000):
    """Best geometric margin over directions in the plane, by exhaustive angle search."""
    theta = np.linspace(0.0, 2 * np.pi, steps, endpoint=False)
    proj = P @ np.stack([np.cos(theta), np.sin(theta)])
    gap = proj[y > 0].min(axis=0) - proj[y < 0].max(axis=0)
    return float(gap.max() / 2)


def test_max_margin_against_grid_search_oracle():
    points = np.array(list(itertools.product([0.0, 1.0], repeat=2)))
    rng = np.random.default_rng(102)
    checked = 0
    for n in (2, 3, 4):
        for idx in itertools.combinations(range(4), n):
            P = points[list(idx)]
            for labels in itertools.product([-1.0, 1.0], repeat=n):
                y = np.array(labels)
                if len(set(labels)) < 2:
                    continue
                margin = grid_margin_oracle(P, y)
                if margin <= 0:
                    continue  # not linearly separable
                bits = rng.choice(16, 2, replace=False)
                X = np.zeros((n, 16))
                X[:, bits] = P
                model = train_binary(X, y, HARD)
                assert np.all(np.sign(model.decision_values(X)) == y)
                assert 1.0 / np.linalg.norm(model.weights) == pytest.approx(margin, rel=1e-3)
                checked += 1
    assert checked > 20


def test_kkt_on_random_soft_margin_problems():
    rng = np.random.default_rng(103)
    for _ in range(100):
        n = int(rng.integers(2, 40))
        X = rng.integers(0, 2, (n, 16)).astype(float)
        y = rng.choice([-1.0, 1.0], n)
        y[:2] = [-1.0, 1.0]
        params = TrainParams(c=float(rng.choice([0.1, 1.0, 10.0])), seed=int(rng.integers(100)))
        model = train_binary(X, y, params)
        assert model.train_meta["converged"]
        assert_model_invariants(model, X, y)
        assert len(kkt_violations(model, X, y, params.tol)) == 0


def test_debug_run_objective_never_decreases():
    rng = np.random.default_rng(104)
    for _ in range(30):
        X = rng.integers(0, 2, (30, 16)).astype(float)
        y = rng.choice([-1.0, 1.0], 30)
        y[:2] = [-1.0, 1.0]
        trace = []
        train_binary(X, y, TrainParams(c=1.0), debug=True, objective_trace=trace)
        assert trace, "no updates recorded"
        assert all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))


def test_contradictory_duplicates_terminate():
    X = np.array([_unit(3), _unit(3), _unit(3), _unit(5)])
    y = np.array([1.0, -1.0, 1.0, -1.0])
    params = TrainParams(c=1.0, max_iterations=1000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = train_binary(X, y, params, debug=True)
    assert model.train_meta["iterations"] <= params.max_iterations
    assert_model_invariants(model, X, y)


def test_iteration_cap_warns():
    rng = np.random.default_rng(105)
    X, y = separable_instance(rng, max_n=20)
    X = np.vstack([X, X])
    y = np.concatenate([y, y])
    with pytest.warns(UserWarning, match="without reaching"):
        model = train_binary(X, y, TrainParams(c=1000.0, max_iterations=1))
    assert model.train_meta["iterations"] == 1
    assert not model.train_meta["converged"]


def test_input_errors():
    X = np.eye(2, 16)
    with pytest.raises(ValueError, match="single-class"):
        train_binary(X, [1, 1])
    with pytest.raises(ValueError, match="length"):
        train_binary(X, [1, -1, 1])
    with pytest.raises(ValueError):
        train_binary(np.zeros((0, 16)), [])
    with pytest.raises(ValueError):
        train_binary(X, [1, 0])
    for bad in (dict(c=0), dict(tol=0), dict(max_passes=0), dict(max_iterations=0)):
        with pytest.raises(ValueError):
            TrainParams(**bad)


def test_determinism():
    rng = np.random.default_rng(106)
    X = rng.integers(0, 2, (50, 16)).astype(float)
    y = rng.choice([-1.0, 1.0], 50)
    assert train_binary(X, y, TrainParams(seed=3)) == train_binary(X, y, TrainParams(seed=3))


@hsettings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.lists(st.integers(0, 1), min_size=16, max_size=16), st.sampled_from([-1.0, 1.0])),
             min_size=2, max_size=25),
    st.sampled_from([0.5, 1.0, 5.0]),
)
def test_invariants_hold_on_arbitrary_data(rows, c):
    X = np.array([r for r, _ in rows], dtype=float)
    y = np.array([lab for _, lab in rows])
    assume(len(set(y.tolist())) == 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = train_binary(X, y, TrainParams(c=c), debug=True)
    assert_model_invariants(model, X, y)


def test_sklearn_estimator():
    rng = np.random.default_rng(107)
    X, y = separable_instance(rng)
    labels = np.where(y > 0, "yes", "no")
    clf = SMOClassifier(C=1000.0).fit(X, labels)
    assert (clf.predict(X) == labels).all()
    assert clf.coef_.shape == (1, 16)
    assert clone(clf).get_params() == clf.get_params()
    with pytest.raises(ValueError, match="2 classes"):
        SMOClassifier().fit(X, np.zeros(len(X)))
