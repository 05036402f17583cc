from pathlib import Path

import numpy as np
import pytest
from sklearn.base import clone

from engagement.features import FeatureVector
from engagement.pipeline import training_states
from engagement.states import EngagementState
from engagement.svm import (
    BinaryModel,
    ModelFormatError,
    MulticlassModel,
    OneVsRestSMO,
    TrainParams,
    deserialize_model,
    load_model,
    predict,
    save_model,
    serialize_model,
    train_multiclass,
)
from engagement.workflow import split_features

GOLDEN = Path(__file__).parent / "data" / "golden_model_v1.svm"


def _fixed(weights_rows, biases, labels):
    binaries = tuple(
        BinaryModel(np.asarray(w, dtype=float), float(b), np.zeros(0), np.zeros(0, dtype=np.int64))
        for w, b in zip(weights_rows, biases)
    )
    return MulticlassModel(tuple(labels), binaries)


def random_dataset(rng, n=40, states=(1, 4, 5)):
    X = rng.integers(0, 2, (n, 16)).astype(float)
    y = rng.choice(states, n)
    y[: len(states)] = states
    return X, y


def test_two_state_structure():
    rng = np.random.default_rng(1)
    X, y = random_dataset(rng, states=(1, 4))
    model = train_multiclass(zip(X, y))
    assert model.class_labels == (1, 4)
    assert len(model.binaries) == 2


def test_feature_vectors_accepted():
    rng = np.random.default_rng(2)
    X, y = random_dataset(rng, states=(1, 4))
    dataset = [(FeatureVector(tuple(int(v) for v in x)), EngagementState(int(s))) for x, s in zip(X, y)]
    assert train_multiclass(dataset) == train_multiclass(zip(X, y))


def test_simulator_three_state_training_is_reproducible(corpus, settings):
    X, y = split_features(corpus.streams, corpus.manifest, "train", settings.thresholds)
    dataset = list(zip(X, training_states(y, keep_action=True)))
    first = train_multiclass(dataset, settings.train)
    second = train_multiclass(dataset, settings.train)
    assert first.class_labels == (1, 4, 5)
    assert len(first.binaries) == 3
    assert serialize_model(first) == serialize_model(second)


def test_per_class_seeds():
    rng = np.random.default_rng(3)
    X, y = random_dataset(rng)
    model = train_multiclass(zip(X, y), TrainParams(seed=10))
    assert [b.train_meta["params"]["seed"] for b in model.binaries] == [10, 11, 12]


def test_argmax_and_tie_break():
    model = _fixed([np.zeros(16), np.zeros(16)], [2.0, -1.0], [1, 4])
    state, values = predict(model, np.zeros(16))
    assert state == EngagementState.DISENGAGEMENT
    np.testing.assert_array_equal(values, [2.0, -1.0])
    tie = _fixed([np.zeros(16), np.zeros(16)], [0.5, 0.5], [4, 5])
    assert predict(tie, np.ones(16))[0] == EngagementState.INTENTION_TO_ACT
    with pytest.raises(ValueError):
        predict(tie, np.ones(3))


def test_bias_shift_invariance():
    rng = np.random.default_rng(4)
    X, y = random_dataset(rng)
    model = train_multiclass(zip(X, y))
    shifted = MulticlassModel(
        model.class_labels,
        tuple(BinaryModel(b.weights, b.bias + 3.7, b.alphas, b.support_indices, b.train_meta) for b in model.binaries),
    )
    grid = rng.integers(0, 2, (500, 16)).astype(float)
    np.testing.assert_array_equal(model.predict_states(grid), shifted.predict_states(grid))


def test_sample_order_does_not_change_the_classifier():
    # The soft-margin optimum is unique in w, so permuting the training set
    # must give the same decision function up to solver tolerance.
    rng = np.random.default_rng(5)
    for _ in range(10):
        X, y = random_dataset(rng, n=30)
        perm = rng.permutation(len(y))
        a = train_multiclass(zip(X, y), TrainParams(tol=1e-6))
        b = train_multiclass(zip(X[perm], y[perm]), TrainParams(tol=1e-6))
        np.testing.assert_allclose(a.coef, b.coef, atol=1e-3)
        np.testing.assert_allclose(a.intercept, b.intercept, atol=1e-3)


def test_multiclass_errors():
    with pytest.raises(ValueError, match="empty"):
        train_multiclass([])
    with pytest.raises(ValueError, match="2 distinct"):
        train_multiclass([(np.zeros(16), 1), (np.ones(16), 1)])
    with pytest.raises(ValueError):
        train_multiclass([(np.zeros(16), 7), (np.ones(16), 1)])


def test_one_vs_rest_estimator():
    rng = np.random.default_rng(6)
    X, y = random_dataset(rng)
    clf = OneVsRestSMO(random_state=2).fit(X, y)
    assert list(clf.classes_) == [1, 4, 5]
    assert clf.decision_function(X).shape == (len(X), 3)
    np.testing.assert_array_equal(clf.predict(X), clf.model_.predict_states(X))
    assert clone(clf).get_params() == clf.get_params()


# --- model files ------------------------------------------------------------


def test_model_round_trip_random_instances(tmp_path):
    rng = np.random.default_rng(8)
    for k in range(100):
        X, y = random_dataset(rng, n=int(rng.integers(4, 30)), states=tuple(sorted(rng.choice(np.arange(1, 7), 3, replace=False))))
        model = train_multiclass(zip(X, y), TrainParams(c=float(rng.uniform(0.1, 5)), seed=k), f"fp{k}")
        back = deserialize_model(serialize_model(model))
        assert back == model
        for a, b in zip(back.binaries, model.binaries):
            assert a.bias == b.bias and a.weights.tolist() == b.weights.tolist()
    path = tmp_path / "m.svm"
    save_model(path, model)
    assert load_model(path) == model


def test_model_file_corruption():
    rng = np.random.default_rng(9)
    X, y = random_dataset(rng)
    data = serialize_model(train_multiclass(zip(X, y)))
    with pytest.raises(ModelFormatError, match="corrupted"):
        deserialize_model(data[: len(data) // 2])
    with pytest.raises(ModelFormatError, match="checksum"):
        deserialize_model(data.replace(b'"bias":', b'"bias": ', 1))
    with pytest.raises(ModelFormatError, match="version mismatch"):
        deserialize_model(data.replace(b"MODEL 1", b"MODEL 2", 1))
    with pytest.raises(ModelFormatError, match="magic"):
        deserialize_model(b"hello\n")
    with pytest.raises(ModelFormatError):
        deserialize_model(b"\xff\xfe")


def test_golden_version_one_file():
    data = GOLDEN.read_bytes()
    model = deserialize_model(data)
    assert model.class_labels == (1, 4, 5)
    assert model.thresholds_fingerprint == "golden-fingerprint"
    assert serialize_model(model) == data
    np.testing.assert_allclose(model.intercept, [-1.08873576, 1.97228031, -3.20506382], atol=1e-8)
    np.testing.assert_allclose(model.binaries[0].weights[:4], [1.08093663, 0.95768788, 0.0655433, 0.105461], atol=1e-8)
    X = np.random.default_rng(7).integers(0, 2, (24, 16)).astype(float)
    expected = [1, 1, 1, 4, 1, 4, 1, 5, 1, 1, 4, 1, 4, 5, 5, 4, 4, 5, 4, 4, 1, 4, 1, 1]
    assert model.predict_states(X).tolist() == expected
