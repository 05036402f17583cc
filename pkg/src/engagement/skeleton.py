"""Skeleton data types, the line-delimited stream file format, and frame checks.

Coordinates are meters in the sensor frame: x to the right, y up, and z
pointing from the sensor into the room, so a participant facing the screen
moves *forward* along ``-z``.

Stream file layout (UTF-8, one record per line)::

    {"format": "engagement-skeleton-stream", "version": 1,
     "participant_id": "P1", "frame_rate": 30.0, "label_set": [1, 4, 5]}
    <timestamp> head <x> <y> <z> shoulder_left <x> <y> <z> ... hip_right <x> <y> <z> [<label>]

The first line is a JSON header (``label_set`` is ``null`` for unlabeled
streams). Every following line is one frame: the timestamp in seconds, then
ten ``name x y z`` groups in the order of :data:`JOINTS`, then the integer
ground-truth label when the header declares a label set. Readers accept the
joint groups in any order; writers always emit the canonical order.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

JOINTS = (
    "head",
    "shoulder_left",
    "shoulder_right",
    "elbow_left",
    "elbow_right",
    "hand_left",
    "hand_right",
    "torso",
    "hip_left",
    "hip_right",
)
JOINT_INDEX = {name: i for i, name in enumerate(JOINTS)}
N_JOINTS = len(JOINTS)

# Tracked by full-body sensors but irrelevant for seated participants.
LOWER_BODY_JOINTS = frozenset(
    {"knee_left", "knee_right", "ankle_left", "ankle_right", "foot_left", "foot_right"}
)

FORMAT_NAME = "engagement-skeleton-stream"
FORMAT_VERSION = 1


class StreamFormatError(ValueError):
    """Raised for malformed or invalid stream files and streams."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Joint:
    name: str
    position: tuple


@dataclass(frozen=True)
class SkeletonFrame:
    participant_id: str
    timestamp: float
    joints: tuple

    def position(self, name: str) -> np.ndarray:
        for joint in self.joints:
            if joint.name == name:
                return np.asarray(joint.position, dtype=float)
        raise KeyError(name)

    def positions(self) -> np.ndarray:
        """Joint positions as a ``(10, 3)`` array in canonical order."""
        return np.array([self.position(name) for name in JOINTS], dtype=float)

    @classmethod
    def from_array(cls, participant_id, timestamp, positions) -> "SkeletonFrame":
        positions = np.asarray(positions, dtype=float)
        joints = tuple(
            Joint(name, tuple(float(v) for v in positions[i])) for i, name in enumerate(JOINTS)
        )
        return cls(str(participant_id), float(timestamp), joints)


def validate_frame(frame: SkeletonFrame) -> list:
    """Return one message per violated frame invariant; empty when valid."""
    violations = []
    names = [joint.name for joint in frame.joints]
    for name in names:
        if name not in JOINT_INDEX:
            violations.append(f"unknown joint: {name}")
    for name in JOINTS:
        count = names.count(name)
        if count == 0:
            violations.append(f"missing joint: {name}")
        elif count > 1:
            violations.append(f"duplicate joint: {name}")
    for joint in frame.joints:
        pos = joint.position
        if len(pos) != 3 or not all(math.isfinite(float(v)) for v in pos):
            violations.append(f"non-finite position: {joint.name}")
    if not (math.isfinite(frame.timestamp) and frame.timestamp >= 0):
        violations.append("invalid timestamp")
    return violations


def body_centered(frame: SkeletonFrame) -> SkeletonFrame:
    """Translate every joint so the torso sits at the origin."""
    torso = frame.position("torso")
    joints = tuple(
        Joint(j.name, tuple(float(v) for v in np.asarray(j.position, dtype=float) - torso))
        for j in frame.joints
    )
    return SkeletonFrame(frame.participant_id, frame.timestamp, joints)


def center_positions(positions: np.ndarray) -> np.ndarray:
    """Array form of :func:`body_centered` for ``(..., 10, 3)`` inputs."""
    positions = np.asarray(positions, dtype=float)
    torso = positions[..., JOINT_INDEX["torso"], :]
    return positions - torso[..., np.newaxis, :]


class SkeletonStream:
    """One participant's frames, stored column-wise.

    Parameters
    ----------
    participant_id : str
    frame_rate : float
        Nominal frames per second, > 0.
    timestamps : array-like of shape (n_frames,)
        Seconds since stream start, non-negative and strictly increasing.
    positions : array-like of shape (n_frames, 10, 3)
        Joint positions in :data:`JOINTS` order.
    labels : array-like of shape (n_frames,), optional
        Ground-truth engagement state per frame.
    label_set : sequence of int, optional
        States the labels are drawn from; inferred from ``labels`` if omitted.
    """

    def __init__(self, participant_id, frame_rate, timestamps, positions, labels=None, label_set=None):
        self.participant_id = str(participant_id)
        self.frame_rate = float(frame_rate)
        if not (math.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise StreamFormatError(f"frame_rate must be > 0, got {frame_rate!r}")

        timestamps = np.array(timestamps, dtype=float).reshape(-1)
        positions = np.array(positions, dtype=float)
        if positions.shape != (len(timestamps), N_JOINTS, 3):
            raise StreamFormatError(
                f"positions must have shape ({len(timestamps)}, {N_JOINTS}, 3), got {positions.shape}"
            )
        if not np.all(np.isfinite(timestamps)) or np.any(timestamps < 0):
            raise StreamFormatError("timestamps must be finite and non-negative")
        if np.any(np.diff(timestamps) <= 0):
            bad = int(np.argmax(np.diff(timestamps) <= 0)) + 1
            raise StreamFormatError(f"non-monotonic timestamp at frame {bad}")
        if not np.all(np.isfinite(positions)):
            frame, joint = np.argwhere(~np.isfinite(positions))[0][:2]
            raise StreamFormatError(f"non-finite position: {JOINTS[joint]} at frame {frame}")

        if labels is not None:
            labels = np.array(labels, dtype=np.int64).reshape(-1)
            if len(labels) != len(timestamps):
                raise StreamFormatError(
                    f"label/frame length mismatch: {len(labels)} labels for {len(timestamps)} frames"
                )
            if label_set is None:
                label_set = sorted(set(labels.tolist()))
            label_set = tuple(int(v) for v in label_set)
            if not set(labels.tolist()) <= set(label_set):
                raise StreamFormatError("labels outside the declared label set")
            if not set(label_set) <= set(range(1, 7)):
                raise StreamFormatError(f"label set must be drawn from 1..6, got {label_set}")
            labels.setflags(write=False)
        else:
            label_set = None

        timestamps.setflags(write=False)
        positions.setflags(write=False)
        self.timestamps = timestamps
        self.positions = positions
        self.labels = labels
        self.label_set = label_set

    @classmethod
    def from_frames(cls, frames: Sequence[SkeletonFrame], frame_rate, labels=None, label_set=None):
        if not frames:
            raise StreamFormatError("a stream needs at least one frame")
        ids = {f.participant_id for f in frames}
        if len(ids) != 1:
            raise StreamFormatError(f"frames from several participants: {sorted(ids)}")
        for i, frame in enumerate(frames):
            problems = validate_frame(frame)
            if problems:
                raise StreamFormatError(f"frame {i}: {'; '.join(problems)}")
        return cls(
            ids.pop(),
            frame_rate,
            [f.timestamp for f in frames],
            [f.positions() for f in frames],
            labels=labels,
            label_set=label_set,
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    def frame(self, index: int) -> SkeletonFrame:
        return SkeletonFrame.from_array(self.participant_id, self.timestamps[index], self.positions[index])

    @property
    def frames(self) -> list:
        return [self.frame(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[SkeletonFrame]:
        for i in range(len(self)):
            yield self.frame(i)

    def __eq__(self, other):
        if not isinstance(other, SkeletonStream):
            return NotImplemented
        if (self.participant_id, self.frame_rate, self.label_set) != (
            other.participant_id,
            other.frame_rate,
            other.label_set,
        ):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.positions, other.positions)
            and (self.labels is None or np.array_equal(self.labels, other.labels))
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"SkeletonStream(participant_id={self.participant_id!r}, frame_rate={self.frame_rate}, "
            f"n_frames={len(self)}, labeled={self.labels is not None})"
        )


def serialize_stream(stream: SkeletonStream) -> bytes:
    """Encode a stream in the line-delimited format (floats written with ``repr``)."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "participant_id": stream.participant_id,
        "frame_rate": stream.frame_rate,
        "label_set": list(stream.label_set) if stream.label_set is not None else None,
    }
    lines = [json.dumps(header)]
    coords = stream.positions.reshape(len(stream), -1).tolist()
    times = stream.timestamps.tolist()
    labels = stream.labels.tolist() if stream.labels is not None else None
    for i, (t, row) in enumerate(zip(times, coords)):
        parts = [repr(t)]
        for j, name in enumerate(JOINTS):
            parts.append(f"{name} {row[3 * j]!r} {row[3 * j + 1]!r} {row[3 * j + 2]!r}")
        if labels is not None:
            parts.append(str(labels[i]))
        lines.append(" ".join(parts))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_header(line: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise StreamFormatError(f"malformed header: {exc.msg}", line=1) from None
    if not isinstance(header, dict):
        raise StreamFormatError("malformed header: expected a JSON object", line=1)
    if header.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise StreamFormatError(f"unknown format {header.get('format')!r}", line=1)
    if header.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise StreamFormatError(f"unsupported stream version {header.get('version')!r}", line=1)
    for key in ("participant_id", "frame_rate"):
        if key not in header:
            raise StreamFormatError(f"header missing field {key!r}", line=1)
    return header


def _parse_record(tokens, lineno, labeled):
    """Slow path for one frame line: any joint order, extra lower-body joints."""
    body = tokens[1:]
    label = None
    if labeled:
        if len(body) % 4 != 1:
            raise StreamFormatError("label/frame length mismatch: frame record has no label", line=lineno)
        label = body[-1]
        body = body[:-1]
    elif len(body) % 4 != 0:
        raise StreamFormatError("malformed record: expected 'name x y z' groups", line=lineno)
    coords = {}
    for k in range(0, len(body), 4):
        name = body[k]
        if name in LOWER_BODY_JOINTS:
            warnings.warn(f"line {lineno}: ignoring lower-body joint {name!r}", stacklevel=3)
            continue
        if name not in JOINT_INDEX:
            raise StreamFormatError(f"unknown joint {name!r}", line=lineno)
        if name in coords:
            raise StreamFormatError(f"duplicate joint {name!r}", line=lineno)
        coords[name] = body[k + 1 : k + 4]
    for name in JOINTS:
        if name not in coords:
            raise StreamFormatError(f"missing joint: {name}", line=lineno)
    values = [v for name in JOINTS for v in coords[name]]
    return values, label


def parse_stream(source) -> SkeletonStream:
    """Parse the line-delimited stream format from bytes or text.

    Raises
    ------
    StreamFormatError
        With the offending line number for malformed records, missing joints,
        non-finite values, non-monotonic timestamps and label mismatches.
    """
    text = source.decode("utf-8") if isinstance(source, (bytes, bytearray)) else str(source)
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise StreamFormatError("empty stream: missing header", line=1)
    header = _parse_header(lines[0])
    label_set = header.get("label_set")
    labeled = label_set is not None

    expected_names = list(JOINTS)
    n_fast = 1 + 4 * N_JOINTS + (1 if labeled else 0)
    times, coords, labels, linenos = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) == n_fast and tokens[1 : 4 * N_JOINTS : 4] == expected_names:
            values = [tok for k in range(N_JOINTS) for tok in tokens[2 + 4 * k : 5 + 4 * k]]
            label = tokens[-1] if labeled else None
        else:
            values, label = _parse_record(tokens, lineno, labeled)
        times.append(tokens[0])
        coords.append(values)
        labels.append(label)
        linenos.append(lineno)

    if not times:
        raise StreamFormatError("stream has no frame records", line=2)

    try:
        t = np.array(times, dtype=float)
        xyz = np.array(coords, dtype=float).reshape(-1, N_JOINTS, 3)
    except ValueError:
        for lineno, tok, vals in zip(linenos, times, coords):
            try:
                float(tok)
                [float(v) for v in vals]
            except ValueError:
                raise StreamFormatError("malformed record: non-numeric value", line=lineno) from None
        raise

    bad = ~np.isfinite(xyz)
    if bad.any():
        frame, joint = np.argwhere(bad)[0][:2]
        raise StreamFormatError(f"non-finite position: {JOINTS[joint]}", line=linenos[frame])
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        frame = int(np.argmax(~np.isfinite(t) | (t < 0)))
        raise StreamFormatError("invalid timestamp", line=linenos[frame])
    steps = np.diff(t) <= 0
    if steps.any():
        frame = int(np.argmax(steps)) + 1
        raise StreamFormatError("non-monotonic timestamp", line=linenos[frame])

    y = None
    if labeled:
        parsed = []
        for lineno, value in zip(linenos, labels):
            try:
                parsed.append(int(value))
            except ValueError:
                raise StreamFormatError(f"malformed label {value!r}", line=lineno) from None
        y = np.array(parsed, dtype=np.int64)
        outside = ~np.isin(y, np.asarray(label_set, dtype=np.int64))
        if outside.any():
            raise StreamFormatError(
                f"label {int(y[outside][0])} outside label set {label_set}",
                line=linenos[int(np.argmax(outside))],
            )
    return SkeletonStream(header["participant_id"], header["frame_rate"], t, xyz, labels=y, label_set=label_set)


def read_stream(path) -> SkeletonStream:
    return parse_stream(Path(path).read_bytes())


def write_stream(path, stream: SkeletonStream) -> None:
    Path(path).write_bytes(serialize_stream(stream))
