"""Windowed kinematic measures and the bank of 16 binary posture/motion classifiers.

Five indicators feed the feature vector:

* sagittal lean (backward / sideways / upright / leaning-forward process / forward)
* hand height (rest / mid / raised)
* hand speed (near zero / moderate / high)
* torso orientation (facing screen / turned away)
* whole-body motion (still / moderate / agitated)

Velocities are least-squares slopes over a trailing window of frames, so a
window never looks at frames after the one being classified.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from .skeleton import JOINT_INDEX, N_JOINTS, SkeletonStream, validate_frame

FEATURE_NAMES = (
    "lean_backward",
    "lean_sideways",
    "lean_upright",
    "lean_forward_process",
    "lean_forward",
    "hand_rest",
    "hand_mid",
    "hand_raised",
    "hand_speed_near_zero",
    "hand_speed_moderate",
    "hand_speed_high",
    "facing_screen",
    "turned_away",
    "motion_still",
    "motion_moderate",
    "motion_agitated",
)
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

# Groups where exactly one bit is set.
PARTITIONS = (
    ("lean_backward", "lean_upright", "lean_forward"),
    ("hand_rest", "hand_mid", "hand_raised"),
    ("hand_speed_near_zero", "hand_speed_moderate", "hand_speed_high"),
    ("motion_still", "motion_moderate", "motion_agitated"),
)

_HEAD = JOINT_INDEX["head"]
_TORSO = JOINT_INDEX["torso"]
_HANDS = (JOINT_INDEX["hand_left"], JOINT_INDEX["hand_right"])
_SHOULDERS = (JOINT_INDEX["shoulder_left"], JOINT_INDEX["shoulder_right"])
_HIPS = (JOINT_INDEX["hip_left"], JOINT_INDEX["hip_right"])


@dataclass(frozen=True)
class ClassifierThresholds:
    """Cut points for the binary classifiers (degrees, meters, seconds)."""

    lean_fwd_deg: float = 8.0
    lean_back_deg: float = -8.0
    lateral_deg: float = 10.0
    lean_rate_deg_s: float = 15.0
    hand_speed_eps_m_s: float = 0.05
    hand_speed_high_m_s: float = 0.5
    yaw_facing_deg: float = 15.0
    yaw_away_deg: float = 30.0
    motion_still_m_s: float = 0.02
    motion_agitated_m_s: float = 0.3
    window_frames: int = 10

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "window_frames":
                if int(value) != value:
                    raise ValueError(f"window_frames must be an integer, got {value!r}")
                object.__setattr__(self, f.name, int(value))
            else:
                value = float(value)
                if not np.isfinite(value):
                    raise ValueError(f"{f.name} must be finite")
                object.__setattr__(self, f.name, value)
        if not self.lean_back_deg < 0 < self.lean_fwd_deg:
            raise ValueError("need lean_back_deg < 0 < lean_fwd_deg")
        if not self.yaw_facing_deg < self.yaw_away_deg:
            raise ValueError("need yaw_facing_deg < yaw_away_deg")
        if not self.motion_still_m_s < self.motion_agitated_m_s:
            raise ValueError("need motion_still_m_s < motion_agitated_m_s")
        if not self.hand_speed_eps_m_s < self.hand_speed_high_m_s:
            raise ValueError("need hand_speed_eps_m_s < hand_speed_high_m_s")
        if self.window_frames < 2:
            raise ValueError("window_frames must be >= 2")

    @classmethod
    def from_mapping(cls, mapping) -> "ClassifierThresholds":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**mapping)

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        """Stable hash of the threshold values, stored in trained models."""
        canon = ";".join(f"{k}={v!r}" for k, v in sorted(self.to_dict().items()))
        return hashlib.sha256(canon.encode("ascii")).hexdigest()[:16]


@dataclass(frozen=True)
class WindowMeasures:
    """Kinematic summary of one trailing window, taken at its last frame.

    ``hand_height_class_input`` holds, for the left then the right hand, the
    hand height above the mean hip height and above the mean shoulder height.
    """

    sagittal_lean_deg: float
    lateral_lean_deg: float
    sagittal_lean_rate_deg_s: float
    hand_height_class_input: tuple
    max_hand_speed_m_s: float
    torso_yaw_deg: float
    motion_energy_m_s: float

    def __post_init__(self):
        values = [
            self.sagittal_lean_deg,
            self.lateral_lean_deg,
            self.sagittal_lean_rate_deg_s,
            self.max_hand_speed_m_s,
            self.torso_yaw_deg,
            self.motion_energy_m_s,
            *np.ravel(self.hand_height_class_input),
        ]
        if not np.all(np.isfinite(values)):
            raise ValueError("window measures must be finite")
        if self.max_hand_speed_m_s < 0 or self.motion_energy_m_s < 0:
            raise ValueError("speeds must be non-negative")

    @classmethod
    def zeros(cls) -> "WindowMeasures":
        return cls(0.0, 0.0, 0.0, ((0.0, 0.0), (0.0, 0.0)), 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FeatureVector:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != N_FEATURES or not set(bits) <= {0, 1}:
            raise ValueError(f"a feature vector holds {N_FEATURES} binary values")
        object.__setattr__(self, "bits", bits)

    def __getitem__(self, name):
        if isinstance(name, str):
            return self.bits[FEATURE_INDEX[name]]
        return self.bits[name]

    def __len__(self):
        return N_FEATURES

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.float64)

    def active(self) -> list:
        return [name for name, bit in zip(FEATURE_NAMES, self.bits) if bit]


def partition_violations(bits) -> list:
    """Names of the feature-vector invariants ``bits`` breaks."""
    fv = FeatureVector(bits) if not isinstance(bits, FeatureVector) else bits
    broken = []
    for group in PARTITIONS:
        if sum(fv[name] for name in group) != 1:
            broken.append("one-of(" + ", ".join(group) + ")")
    if fv["facing_screen"] and fv["turned_away"]:
        broken.append("at-most-one(facing_screen, turned_away)")
    return broken


def _ls_slope(times, values):
    """Least-squares slope of ``values`` against ``times`` along axis 1.

    ``times`` has shape (n, W); ``values`` has shape (n, W, ...).
    """
    dt = times - times.mean(axis=1, keepdims=True)
    denom = np.einsum("nw,nw->n", dt, dt)
    if np.any(denom <= 0):
        raise ValueError("window has zero time span")
    # Offsetting by the last sample (any constant works since dt sums to zero)
    # keeps a motionless window at exactly zero slope.
    centered = values - values[:, -1:]
    num = np.einsum("nw,nw...->n...", dt, centered)
    return num / denom.reshape((-1,) + (1,) * (num.ndim - 1))


def measure_arrays(times, positions) -> dict:
    """Vectorized window measures.

    Parameters
    ----------
    times : ndarray of shape (n, W)
    positions : ndarray of shape (n, W, 10, 3)

    Returns
    -------
    dict of ndarray
        ``sagittal``, ``lateral``, ``lean_rate`` and ``yaw`` (degrees), ``hand_rel``
        of shape (n, 2, 2), ``hand_speed`` and ``motion`` (m/s).
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    if times.ndim != 2 or times.shape[1] < 2:
        raise ValueError("a window needs at least 2 frames")
    if positions.shape != times.shape + (N_JOINTS, 3):
        raise ValueError(f"positions shape {positions.shape} does not match times {times.shape}")

    up = positions[:, :, _HEAD] - positions[:, :, _TORSO]
    sagittal_series = np.degrees(np.arctan2(-up[..., 2], up[..., 1]))
    lateral = np.degrees(np.arctan2(up[:, -1, 0], up[:, -1, 1]))
    lean_rate = _ls_slope(times, sagittal_series)

    velocity = _ls_slope(times, positions)
    speed = np.linalg.norm(velocity, axis=-1)
    hand_speed = speed[:, _HANDS].max(axis=1)
    motion = speed.mean(axis=1)

    last = positions[:, -1]
    hip_y = last[:, _HIPS, 1].mean(axis=1)
    shoulder_y = last[:, _SHOULDERS, 1].mean(axis=1)
    hand_y = last[:, _HANDS, 1]
    hand_rel = np.stack([hand_y - hip_y[:, None], hand_y - shoulder_y[:, None]], axis=-1)

    across = last[:, _SHOULDERS[1]] - last[:, _SHOULDERS[0]]
    yaw = np.degrees(np.arctan2(across[:, 2], across[:, 0]))

    return {
        "sagittal": sagittal_series[:, -1],
        "lateral": lateral,
        "lean_rate": lean_rate,
        "hand_rel": hand_rel,
        "hand_speed": hand_speed,
        "yaw": yaw,
        "motion": motion,
    }


def classify_arrays(m: dict, thresholds: ClassifierThresholds) -> np.ndarray:
    """Evaluate all 16 classifiers on vectorized measures; returns (n, 16) uint8."""
    th = thresholds
    n = len(m["sagittal"])
    bits = np.zeros((n, N_FEATURES), dtype=np.uint8)
    col = FEATURE_INDEX

    sag = m["sagittal"]
    backward = sag < th.lean_back_deg
    forward = sag > th.lean_fwd_deg
    bits[:, col["lean_backward"]] = backward
    bits[:, col["lean_forward"]] = forward
    bits[:, col["lean_upright"]] = ~(backward | forward)
    bits[:, col["lean_sideways"]] = np.abs(m["lateral"]) > th.lateral_deg
    bits[:, col["lean_forward_process"]] = m["lean_rate"] > th.lean_rate_deg_s

    # The higher hand decides the height band.
    rel = m["hand_rel"]
    higher = np.argmax(rel[:, :, 0], axis=1)
    above_hip = rel[np.arange(n), higher, 0]
    above_shoulder = rel[np.arange(n), higher, 1]
    raised = above_shoulder > 0
    rest = ~raised & (above_hip <= 0)
    bits[:, col["hand_raised"]] = raised
    bits[:, col["hand_rest"]] = rest
    bits[:, col["hand_mid"]] = ~(raised | rest)

    speed = m["hand_speed"]
    near_zero = speed < th.hand_speed_eps_m_s
    high = speed > th.hand_speed_high_m_s
    bits[:, col["hand_speed_near_zero"]] = near_zero
    bits[:, col["hand_speed_high"]] = high
    bits[:, col["hand_speed_moderate"]] = ~(near_zero | high)

    yaw = np.abs(m["yaw"])
    bits[:, col["facing_screen"]] = yaw < th.yaw_facing_deg
    bits[:, col["turned_away"]] = yaw > th.yaw_away_deg

    motion = m["motion"]
    still = motion < th.motion_still_m_s
    agitated = motion > th.motion_agitated_m_s
    bits[:, col["motion_still"]] = still
    bits[:, col["motion_agitated"]] = agitated
    bits[:, col["motion_moderate"]] = ~(still | agitated)
    return bits


def _measures_from_arrays(m: dict, i: int) -> WindowMeasures:
    return WindowMeasures(
        sagittal_lean_deg=float(m["sagittal"][i]),
        lateral_lean_deg=float(m["lateral"][i]),
        sagittal_lean_rate_deg_s=float(m["lean_rate"][i]),
        hand_height_class_input=tuple(tuple(float(v) for v in hand) for hand in m["hand_rel"][i]),
        max_hand_speed_m_s=float(m["hand_speed"][i]),
        torso_yaw_deg=float(m["yaw"][i]),
        motion_energy_m_s=float(m["motion"][i]),
    )


def _arrays_from_measures(measures: WindowMeasures) -> dict:
    return {
        "sagittal": np.array([measures.sagittal_lean_deg]),
        "lateral": np.array([measures.lateral_lean_deg]),
        "lean_rate": np.array([measures.sagittal_lean_rate_deg_s]),
        "hand_rel": np.asarray(measures.hand_height_class_input, dtype=float).reshape(1, 2, 2),
        "hand_speed": np.array([measures.max_hand_speed_m_s]),
        "yaw": np.array([measures.torso_yaw_deg]),
        "motion": np.array([measures.motion_energy_m_s]),
    }


def compute_measures(window, thresholds: ClassifierThresholds | None = None) -> WindowMeasures:
    """Measures for a window of at least two consecutive frames of one participant.

    ``thresholds`` is accepted for symmetry with :func:`evaluate_classifiers`;
    the window length is whatever the caller passes.
    """
    window = list(window)
    if len(window) < 2:
        raise ValueError("a window needs at least 2 frames")
    if len({f.participant_id for f in window}) != 1:
        raise ValueError("window mixes participants")
    for f in window:
        problems = validate_frame(f)
        if problems:
            raise ValueError(f"invalid frame at t={f.timestamp}: {'; '.join(problems)}")
    times = np.array([[f.timestamp for f in window]])
    if np.any(np.diff(times[0]) < 0):
        raise ValueError("window frames are not time-ordered")
    positions = np.array([[f.positions() for f in window]])
    return _measures_from_arrays(measure_arrays(times, positions), 0)


def evaluate_classifiers(measures: WindowMeasures, thresholds: ClassifierThresholds) -> FeatureVector:
    bits = classify_arrays(_arrays_from_measures(measures), thresholds)[0]
    return FeatureVector(tuple(int(b) for b in bits))


def stream_windows(stream: SkeletonStream, window_frames: int, indices=None):
    """Trailing windows of a stream as ``(times (n, W), positions (n, W, 10, 3))``.

    Windows end at each frame from ``window_frames - 1`` onward, or at the
    frames listed in ``indices``.
    """
    if len(stream) < window_frames:
        raise ValueError(f"stream has {len(stream)} frames; need at least window_frames={window_frames}")
    t_win = sliding_window_view(stream.timestamps, window_frames)
    p_win = sliding_window_view(stream.positions, window_frames, axis=0)  # (n, 10, 3, W)
    if indices is not None:
        idx = np.asarray(indices, dtype=np.int64) - (window_frames - 1)
        if np.any(idx < 0) or np.any(idx >= len(t_win)):
            raise IndexError("frame index has no complete trailing window")
        t_win, p_win = t_win[idx], p_win[idx]
    return t_win, np.moveaxis(p_win, -1, 1)


def feature_matrix(stream: SkeletonStream, thresholds: ClassifierThresholds, indices=None):
    """Vectorized feature extraction.

    Returns ``(timestamps, bits, hand_speed)`` for every frame with a full
    trailing window (or for the frames in ``indices``).
    """
    times, positions = stream_windows(stream, thresholds.window_frames, indices)
    m = measure_arrays(times, positions)
    return times[:, -1].copy(), classify_arrays(m, thresholds), m["hand_speed"]


def feature_sequence(stream: SkeletonStream, thresholds: ClassifierThresholds) -> list:
    """Per-frame ``(timestamp, FeatureVector, max_hand_speed_m_s)`` from frame ``window_frames - 1`` on."""
    times, bits, speed = feature_matrix(stream, thresholds)
    return [
        (float(t), FeatureVector(tuple(int(b) for b in row)), float(s))
        for t, row, s in zip(times, bits, speed)
    ]


def pack_windows(times, positions) -> np.ndarray:
    """Flatten windows into the ``(n, W, 31)`` array layout used by the estimators."""
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    flat = positions.reshape(positions.shape[:2] + (N_JOINTS * 3,))
    return np.concatenate([times[..., None], flat], axis=-1)


def unpack_windows(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[2] != 1 + 3 * N_JOINTS:
        raise ValueError(f"expected windows of shape (n, W, {1 + 3 * N_JOINTS}), got {X.shape}")
    return X[..., 0], X[..., 1:].reshape(X.shape[:2] + (N_JOINTS, 3))


class FeatureBank(TransformerMixin, BaseEstimator):
    """Stateless transformer from skeleton windows to 16-bit feature vectors.

    Input windows are packed as ``(n_windows, window_frames, 31)``: the
    timestamp followed by the 30 joint coordinates (see :func:`pack_windows`).
    The keyword arguments mirror :class:`ClassifierThresholds`.
    """

    def __init__(
        self,
        lean_fwd_deg=8.0,
        lean_back_deg=-8.0,
        lateral_deg=10.0,
        lean_rate_deg_s=15.0,
        hand_speed_eps_m_s=0.05,
        hand_speed_high_m_s=0.5,
        yaw_facing_deg=15.0,
        yaw_away_deg=30.0,
        motion_still_m_s=0.02,
        motion_agitated_m_s=0.3,
        window_frames=10,
    ):
        self.lean_fwd_deg = lean_fwd_deg
        self.lean_back_deg = lean_back_deg
        self.lateral_deg = lateral_deg
        self.lean_rate_deg_s = lean_rate_deg_s
        self.hand_speed_eps_m_s = hand_speed_eps_m_s
        self.hand_speed_high_m_s = hand_speed_high_m_s
        self.yaw_facing_deg = yaw_facing_deg
        self.yaw_away_deg = yaw_away_deg
        self.motion_still_m_s = motion_still_m_s
        self.motion_agitated_m_s = motion_agitated_m_s
        self.window_frames = window_frames

    @classmethod
    def from_thresholds(cls, thresholds: ClassifierThresholds) -> "FeatureBank":
        return cls(**thresholds.to_dict())

    @property
    def thresholds(self) -> ClassifierThresholds:
        return ClassifierThresholds(**self.get_params())

    def fit(self, X, y=None):
        self.thresholds_ = self.thresholds
        self.n_features_in_ = 1 + 3 * N_JOINTS
        return self

    def measures(self, X) -> dict:
        times, positions = unpack_windows(X)
        return measure_arrays(times, positions)

    def transform(self, X) -> np.ndarray:
        return classify_arrays(self.measures(X), self.thresholds)

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)
