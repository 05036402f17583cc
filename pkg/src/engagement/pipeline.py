"""Per-frame engagement classification over skeleton streams.

Each frame with a full trailing window goes through feature extraction, the
one-vs-rest SVM, and the Action override (Intention to Act plus a moving hand
becomes Action). Optional majority-vote smoothing runs afterwards.
"""
from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .features import ClassifierThresholds, FeatureBank, classify_arrays, measure_arrays, stream_windows, unpack_windows
from .skeleton import SkeletonStream
from .states import MODES, EngagementState, state_set
from .svm import MulticlassModel, OneVsRestSMO

INTENTION = EngagementState.INTENTION_TO_ACT
ACTION = EngagementState.ACTION


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "three_state"
    smoothing_window: int = 1
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)
    action_override_enabled: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError(f"smoothing_window must be odd and >= 1, got {self.smoothing_window}")


@dataclass(frozen=True)
class FrameResult:
    timestamp: float
    participant_id: str
    raw_state: EngagementState
    final_state: EngagementState
    hand_speed_m_s: float
    latency_us: float

    def to_record(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "participant_id": self.participant_id,
            "raw_state": int(self.raw_state),
            "final_state": int(self.final_state),
            "hand_speed": self.hand_speed_m_s,
            "latency_us": self.latency_us,
        }

    @classmethod
    def from_record(cls, record: dict) -> "FrameResult":
        return cls(
            timestamp=float(record["timestamp"]),
            participant_id=str(record["participant_id"]),
            raw_state=EngagementState(int(record["raw_state"])),
            final_state=EngagementState(int(record["final_state"])),
            hand_speed_m_s=float(record["hand_speed"]),
            latency_us=float(record["latency_us"]),
        )


def apply_action_override(raw_state, hand_speed: float, eps: float) -> EngagementState:
    """Promote Intention to Act to Action when a hand moves faster than ``eps``."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    state = EngagementState(int(raw_state))
    if state == INTENTION and hand_speed > eps:
        return ACTION
    return state


def override_array(raw_states, hand_speed, eps: float) -> np.ndarray:
    raw_states = np.asarray(raw_states)
    return np.where((raw_states == INTENTION) & (np.asarray(hand_speed) > eps), int(ACTION), raw_states)


def smooth_states(sequence, window: int) -> list:
    """Centered majority vote; ties keep the value at the center index."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"smoothing window must be odd and >= 1, got {window}")
    seq = [EngagementState(int(s)) for s in sequence]
    if window == 1:
        return seq
    half = window // 2
    out = []
    for i, current in enumerate(seq):
        counts = Counter(seq[max(0, i - half) : i + half + 1]).most_common()
        best = counts[0][1]
        leaders = [state for state, n in counts if n == best]
        out.append(leaders[0] if len(leaders) == 1 else current)
    return out


def check_compatible(model: MulticlassModel, config: PipelineConfig) -> None:
    expected = config.thresholds.fingerprint()
    if model.thresholds_fingerprint != expected:
        raise PipelineError(
            f"fingerprint mismatch: model features used thresholds {model.thresholds_fingerprint!r}, "
            f"pipeline is configured with {expected!r}"
        )
    allowed = {int(s) for s in state_set(config.mode)}
    extra = set(int(c) for c in model.class_labels) - allowed
    if extra:
        raise PipelineError(f"model predicts states {sorted(extra)} outside {config.mode} mode")


class FrameClassifier:
    """Classifies one trailing window at a time; the unit timed for latency."""

    def __init__(self, model: MulticlassModel, config: PipelineConfig):
        check_compatible(model, config)
        self.config = config
        self.thresholds = config.thresholds
        self.labels = np.asarray(model.class_labels)
        self.coef_t = model.coef.T.copy()
        self.intercept = model.intercept
        self.eps = config.thresholds.hand_speed_eps_m_s

    def __call__(self, times, positions):
        m = measure_arrays(times[np.newaxis], positions[np.newaxis])
        bits = classify_arrays(m, self.thresholds)
        raw = int(self.labels[np.argmax(bits @ self.coef_t + self.intercept)])
        speed = float(m["hand_speed"][0])
        final = raw
        if self.config.action_override_enabled and raw == INTENTION and speed > self.eps:
            final = int(ACTION)
        return raw, final, speed


def process_stream(stream: SkeletonStream, model: MulticlassModel, config: PipelineConfig | None = None) -> list:
    """Classify every frame that has a full trailing window."""
    config = config or PipelineConfig()
    classify = FrameClassifier(model, config)
    w = config.thresholds.window_frames
    if len(stream) < w:
        raise PipelineError(f"stream too short: {len(stream)} frames, window needs {w}")
    times, positions = stream.timestamps, stream.positions
    pid = stream.participant_id
    results = []
    for end in range(w, len(stream) + 1):
        start = time.perf_counter_ns()
        raw, final, speed = classify(times[end - w : end], positions[end - w : end])
        elapsed = (time.perf_counter_ns() - start) / 1000.0
        results.append(
            FrameResult(float(times[end - 1]), pid, EngagementState(raw), EngagementState(final), speed, elapsed)
        )
    if config.smoothing_window > 1:
        smoothed = smooth_states([r.final_state for r in results], config.smoothing_window)
        results = [
            FrameResult(r.timestamp, r.participant_id, r.raw_state, s, r.hand_speed_m_s, r.latency_us)
            for r, s in zip(results, smoothed)
        ]
    return results


def classify_batch(stream: SkeletonStream, model: MulticlassModel, config: PipelineConfig, indices=None):
    """Vectorized counterpart of :func:`process_stream` without latency accounting.

    Returns ``(timestamps, raw_states, final_states, hand_speed)`` arrays.
    Smoothing is applied only when ``indices`` is None (it needs neighbours).
    """
    check_compatible(model, config)
    times, positions = stream_windows(stream, config.thresholds.window_frames, indices)
    m = measure_arrays(times, positions)
    raw = model.predict_states(classify_arrays(m, config.thresholds).astype(float))
    final = raw
    if config.action_override_enabled:
        final = override_array(raw, m["hand_speed"], config.thresholds.hand_speed_eps_m_s)
    if indices is None and config.smoothing_window > 1:
        final = np.array([int(s) for s in smooth_states(final, config.smoothing_window)])
    return times[:, -1].copy(), raw, final, m["hand_speed"]


def training_states(states, keep_action: bool = False) -> np.ndarray:
    """Labels the SVM is trained on: Action collapses into Intention to Act."""
    states = np.asarray(states, dtype=np.int64)
    if keep_action:
        return states
    return np.where(states == ACTION, int(INTENTION), states)


def write_results(results, fh) -> None:
    for r in results:
        fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")


def read_results(fh) -> list:
    return [FrameResult.from_record(json.loads(line)) for line in fh if line.strip()]


class EngagementClassifier(ClassifierMixin, BaseEstimator):
    """Windows of skeleton frames in, engagement states out.

    Chains :class:`~engagement.features.FeatureBank` and
    :class:`~engagement.svm.OneVsRestSMO`, trains on labels with Action
    folded into Intention to Act, and re-derives Action at predict time from
    hand speed. ``X`` uses the packed window layout of
    :func:`~engagement.features.pack_windows`.
    """

    def __init__(
        self,
        thresholds=None,
        C=1.0,
        tol=1e-3,
        max_passes=10,
        max_iter=100_000,
        random_state=0,
        mode="three_state",
        action_override=True,
        train_action_class=False,
    ):
        self.thresholds = thresholds
        self.C = C
        self.tol = tol
        self.max_passes = max_passes
        self.max_iter = max_iter
        self.random_state = random_state
        self.mode = mode
        self.action_override = action_override
        self.train_action_class = train_action_class

    def _thresholds(self) -> ClassifierThresholds:
        return self.thresholds if self.thresholds is not None else ClassifierThresholds()

    def fit(self, X, y):
        thresholds = self._thresholds()
        self.feature_bank_ = FeatureBank.from_thresholds(thresholds).fit(X)
        bits = self.feature_bank_.transform(X)
        self.svm_ = OneVsRestSMO(
            C=self.C,
            tol=self.tol,
            max_passes=self.max_passes,
            max_iter=self.max_iter,
            random_state=self.random_state,
            thresholds_fingerprint=thresholds.fingerprint(),
        ).fit(bits, training_states(y, self.train_action_class))
        self.model_ = self.svm_.model_
        self.config_ = PipelineConfig(self.mode, 1, thresholds, self.action_override)
        check_compatible(self.model_, self.config_)
        states = set(int(s) for s in self.model_.class_labels)
        if self.action_override and INTENTION in states:
            states.add(int(ACTION))
        self.classes_ = np.array(sorted(states))
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        unpack_windows(X)
        m = self.feature_bank_.measures(X)
        raw = self.model_.predict_states(classify_arrays(m, self.config_.thresholds).astype(float))
        if not self.action_override:
            return raw
        return override_array(raw, m["hand_speed"], self.config_.thresholds.hand_speed_eps_m_s)

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_values(self.feature_bank_.transform(X).astype(float))


def config_to_dict(config: PipelineConfig) -> dict:
    d = asdict(config)
    d["thresholds"] = config.thresholds.to_dict()
    return d
