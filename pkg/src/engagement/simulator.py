"""Deterministic simulator for the dyadic block-selection hand-off game.

One game is a countdown followed by ``switches`` cycles; in cycle k the
active participant (P1 on odd k, P2 on even k) first gets a switch period to
get ready and then a play period to select blocks with one hand. Everyone
who is not switching in or playing is disengaged.

Ground truth per phase:

=============  ==================  ====================
phase          active participant  other participant
=============  ==================  ====================
countdown      --                  Disengagement (both)
switch(q)      Intention to Act    Disengagement
play(p)        Action              Disengagement
=============  ==================  ====================

Pose templates: a disengaged participant leans back 10 degrees with both
hands resting on the thighs; while switching in, the lean ramps from -10 to
+10 degrees and the dominant hand rises slowly from hip to shoulder height;
while playing, the lean holds at +10 degrees and the dominant hand sweeps
curved paths between random block targets at 0.3-0.8 m/s. Gaussian jitter
and a 0.25 Hz breathing sway on the chest are layered on top.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .skeleton import JOINT_INDEX, N_JOINTS, SkeletonStream, write_stream
from .states import THREE_STATE, EngagementState

DIS = EngagementState.DISENGAGEMENT
INT = EngagementState.INTENTION_TO_ACT
ACT = EngagementState.ACTION

MANIFEST_FORMAT = "engagement-corpus-manifest"
MANIFEST_VERSION = 1

LEAN_IDLE_DEG = -10.0
LEAN_ACTIVE_DEG = 10.0
BREATHING_HZ = 0.25
HAND_SPEED_RANGE = (0.3, 0.8)


@dataclass(frozen=True)
class GameConfig:
    countdown_s: float = 10.0
    play_s: float = 10.0
    switch_s: float = 10.0
    switches: int = 20
    games: int = 5
    frame_rate: float = 30.0
    seed: int = 42
    noise_sigma_m: float = 0.007
    screen_distance_m: float = 2.5
    sway_m: float = 0.004

    def __post_init__(self):
        for name in ("countdown_s", "play_s", "switch_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.switches < 1 or self.games < 1:
            raise ValueError("switches and games must be >= 1")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be > 0")
        if self.noise_sigma_m < 0 or self.sway_m < 0:
            raise ValueError("noise_sigma_m and sway_m must be >= 0")

    @property
    def game_duration_s(self) -> float:
        return self.countdown_s + self.switches * (self.play_s + self.switch_s)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Phase:
    start_s: float
    end_s: float
    kind: str
    participant: str | None
    truth: dict


@dataclass(frozen=True)
class PhaseSchedule:
    participants: tuple
    phases: tuple

    @property
    def total_s(self) -> float:
        return self.phases[-1].end_s

    def phase_index(self, t) -> np.ndarray:
        """Phase index for each time in ``t`` (phases are half-open intervals)."""
        ends = np.array([p.end_s for p in self.phases])
        return np.minimum(np.searchsorted(ends, np.asarray(t, dtype=float), side="right"), len(self.phases) - 1)

    def truth_at(self, t: float) -> dict:
        return dict(self.phases[int(self.phase_index([t])[0])].truth)


def build_schedule(config: GameConfig, participants=("P1", "P2")) -> PhaseSchedule:
    first, second = participants
    idle = {first: DIS, second: DIS}
    phases = [Phase(0.0, config.countdown_s, "countdown", None, dict(idle))]
    t = config.countdown_s
    for k in range(1, config.switches + 1):
        active = first if k % 2 == 1 else second
        other = second if active == first else first
        phases.append(Phase(t, t + config.switch_s, "switch", active, {active: INT, other: DIS}))
        t += config.switch_s
        phases.append(Phase(t, t + config.play_s, "play", active, {active: ACT, other: DIS}))
        t += config.play_s
    return PhaseSchedule(tuple(participants), tuple(phases))


@dataclass(frozen=True)
class Body:
    """Seated upper-body geometry, meters, relative to the torso joint."""

    head_height: float = 0.30
    shoulder_height: float = 0.20
    shoulder_half_width: float = 0.18
    hip_depth: float = 0.15
    hip_half_width: float = 0.10
    dominant: str = "right"

    @classmethod
    def random(cls, rng) -> "Body":
        return cls(
            head_height=float(rng.uniform(0.28, 0.32)),
            shoulder_height=float(rng.uniform(0.18, 0.22)),
            shoulder_half_width=float(rng.uniform(0.16, 0.20)),
            hip_depth=float(rng.uniform(0.13, 0.17)),
            hip_half_width=float(rng.uniform(0.09, 0.11)),
            dominant="right" if rng.random() < 0.8 else "left",
        )


def _rotate_lean(offsets, lean_deg):
    """Tilt (n, k, 3) upper-body offsets forward (toward -z) by ``lean_deg``."""
    th = np.radians(lean_deg)[:, None]
    y, z = offsets[..., 1], offsets[..., 2]
    out = offsets.copy()
    out[..., 1] = y * np.cos(th) + z * np.sin(th)
    out[..., 2] = -y * np.sin(th) + z * np.cos(th)
    return out


class _Pose:
    """Geometry helpers for one seated participant."""

    def __init__(self, body: Body, seat_x: float, distance: float):
        self.body = body
        self.base = np.array([seat_x, 0.0, distance])
        self.side = 1.0 if body.dominant == "right" else -1.0

    def rest_hands(self):
        b = self.body
        y = -b.hip_depth - 0.03
        z = -0.20
        left = self.base + [-(b.shoulder_half_width - 0.03), y, z]
        right = self.base + [b.shoulder_half_width - 0.03, y, z]
        return left, right

    def ready_point(self):
        """Where the dominant hand ends the switch period and starts playing."""
        b = self.body
        shoulder_y = b.shoulder_height * np.cos(np.radians(LEAN_ACTIVE_DEG))
        return self.base + [self.side * b.shoulder_half_width, shoulder_y, -0.30]

    def target_box(self):
        b = self.body
        shoulder_y = b.shoulder_height * np.cos(np.radians(LEAN_ACTIVE_DEG))
        lo = self.base + [-0.35 + self.side * 0.1, shoulder_y - 0.10, -0.45]
        hi = self.base + [0.35 + self.side * 0.1, shoulder_y + 0.25, -0.30]
        return lo, hi

    def assemble(self, lean_deg, hand_left, hand_right, sway):
        """Joint positions (n, 10, 3) from per-frame lean, hand positions and chest sway."""
        b = self.body
        n = len(lean_deg)
        torso = self.base + sway
        upper = np.array(
            [
                [0.0, b.head_height, 0.0],
                [-b.shoulder_half_width, b.shoulder_height, 0.0],
                [b.shoulder_half_width, b.shoulder_height, 0.0],
            ]
        )
        upper = _rotate_lean(np.broadcast_to(upper, (n, 3, 3)), np.asarray(lean_deg, dtype=float))
        head = torso + upper[:, 0]
        sh_l = torso + upper[:, 1]
        sh_r = torso + upper[:, 2]
        down_out = np.array([0.06, -0.08, 0.0])
        elbow_l = 0.5 * (sh_l + hand_left) + down_out * [-1, 1, 1]
        elbow_r = 0.5 * (sh_r + hand_right) + down_out
        hip_l = np.broadcast_to(self.base + [-b.hip_half_width, -b.hip_depth, 0.0], (n, 3))
        hip_r = np.broadcast_to(self.base + [b.hip_half_width, -b.hip_depth, 0.0], (n, 3))
        pos = np.empty((n, N_JOINTS, 3))
        for name, value in (
            ("head", head),
            ("shoulder_left", sh_l),
            ("shoulder_right", sh_r),
            ("elbow_left", elbow_l),
            ("elbow_right", elbow_r),
            ("hand_left", hand_left),
            ("hand_right", hand_right),
            ("torso", torso),
            ("hip_left", hip_l),
            ("hip_right", hip_r),
        ):
            pos[:, JOINT_INDEX[name]] = value
        return pos


def template_pose(state, body: Body | None = None, seat_x: float = 0.0, distance: float = 2.5) -> np.ndarray:
    """Noise-free (10, 3) pose for a state at the start of its phase."""
    pose = _Pose(body or Body(), seat_x, distance)
    rest_l, rest_r = pose.rest_hands()
    state = EngagementState(int(state))
    lean = LEAN_ACTIVE_DEG if state == ACT else LEAN_IDLE_DEG
    if state == ACT:
        if pose.side > 0:
            rest_r = pose.ready_point()
        else:
            rest_l = pose.ready_point()
    return pose.assemble(np.array([lean]), rest_l[None], rest_r[None], np.zeros((1, 3)))[0]


def _arc_path(rng, start, pose: _Pose, duration, times):
    """Hand positions at ``times`` (relative, seconds) along random curved sweeps."""
    lo, hi = pose.target_box()
    out = np.empty((len(times), 3))
    t0, point = 0.0, np.asarray(start, dtype=float)
    filled = 0
    grid = np.linspace(0.0, 1.0, 65)
    while filled < len(times):
        target = rng.uniform(lo, hi)
        chord = target - point
        length = np.linalg.norm(chord)
        if length < 0.08:
            continue
        perp = np.array([-chord[1], chord[0], 0.0])
        norm = np.linalg.norm(perp)
        perp = perp / norm if norm > 0 else np.array([0.0, 1.0, 0.0])
        control = 0.5 * (point + target) + perp * rng.uniform(-0.3, 0.3) * length
        curve = (
            ((1 - grid) ** 2)[:, None] * point
            + (2 * (1 - grid) * grid)[:, None] * control
            + (grid**2)[:, None] * target
        )
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(curve, axis=0), axis=1))])
        speed = rng.uniform(*HAND_SPEED_RANGE)
        t1 = t0 + arc[-1] / speed
        stop = np.searchsorted(times, t1, side="left")
        if stop > filled:
            s = (times[filled:stop] - t0) * speed
            out[filled:stop] = np.stack([np.interp(s, arc, curve[:, d]) for d in range(3)], axis=1)
            filled = stop
        t0, point = t1, target
    return out


def synthesize_stream(
    schedule: PhaseSchedule,
    participant: str,
    config: GameConfig,
    body: Body | None = None,
    seat_x: float | None = None,
    stream_seed=None,
) -> SkeletonStream:
    """Labeled skeleton stream of one participant playing one game."""
    if participant not in schedule.participants:
        raise ValueError(f"unknown participant {participant!r}; schedule has {schedule.participants}")
    role = schedule.participants.index(participant)
    body = body or Body()
    if seat_x is None:
        seat_x = -0.45 if role == 0 else 0.45
    key = stream_seed if stream_seed is not None else [config.seed, role]
    rng = np.random.default_rng(key)
    path_rng = np.random.default_rng(rng.integers(2**63))
    noise_rng = np.random.default_rng(rng.integers(2**63))
    phase_of_breath = rng.uniform(0, 2 * np.pi)

    n = int(round(schedule.total_s * config.frame_rate))
    t = np.round(np.arange(n) / config.frame_rate, 6)
    phase_idx = schedule.phase_index(t)
    labels = np.array([int(schedule.phases[i].truth[participant]) for i in phase_idx], dtype=np.int64)

    pose = _Pose(body, seat_x, config.screen_distance_m)
    rest_l, rest_r = pose.rest_hands()
    lean = np.full(n, LEAN_IDLE_DEG)
    dominant = np.tile(rest_r if pose.side > 0 else rest_l, (n, 1))
    ready = pose.ready_point()
    rest_dom = rest_r if pose.side > 0 else rest_l

    for k, ph in enumerate(schedule.phases):
        if ph.truth[participant] == DIS:
            continue
        sel = np.flatnonzero(phase_idx == k)
        if not len(sel):
            continue
        u = (t[sel] - ph.start_s) / (ph.end_s - ph.start_s)
        if ph.truth[participant] == INT:
            lean[sel] = LEAN_IDLE_DEG + (LEAN_ACTIVE_DEG - LEAN_IDLE_DEG) * u
            dominant[sel] = rest_dom + u[:, None] * (ready - rest_dom)
        else:
            lean[sel] = LEAN_ACTIVE_DEG
            dominant[sel] = _arc_path(path_rng, ready, pose, ph.end_s - ph.start_s, t[sel] - ph.start_s)

    if pose.side > 0:
        hand_l, hand_r = np.tile(rest_l, (n, 1)), dominant
    else:
        hand_l, hand_r = dominant, np.tile(rest_r, (n, 1))
    breath = config.sway_m * np.sin(2 * np.pi * BREATHING_HZ * t + phase_of_breath)
    sway = np.stack([np.zeros(n), breath, -0.5 * breath], axis=1)
    positions = pose.assemble(lean, hand_l, hand_r, sway)
    if config.noise_sigma_m > 0:
        positions = positions + noise_rng.normal(0.0, config.noise_sigma_m, positions.shape)
    positions = np.round(positions, 5)
    return SkeletonStream(
        participant, config.frame_rate, t, positions, labels=labels, label_set=[int(s) for s in THREE_STATE]
    )


@dataclass
class Corpus:
    streams: list
    manifest: dict
    paths: list = field(default_factory=list)

    def split_frames(self, split: str):
        """``(stream_index, frame_index)`` pairs of the ``train`` or ``test`` split."""
        return [tuple(p) for p in self.manifest[split]]


def _label_counts(streams, frames) -> dict:
    counts = {str(int(s)): 0 for s in THREE_STATE}
    for s, f in frames:
        counts[str(int(streams[s].labels[f]))] += 1
    return counts


def generate_dataset(
    config: GameConfig,
    pairs: int = 3,
    out_dir=None,
    n_frames: int | None = 2321,
    n_train: int = 500,
    window_frames: int = 10,
) -> Corpus:
    """Simulate ``pairs`` dyads playing ``config.games`` games each.

    Writes one stream file per participant per game under ``out_dir/streams``
    and a ``manifest.json`` when ``out_dir`` is given. The manifest samples
    ``n_frames`` labeled frames (all of them if None) uniformly from the
    frames that have a full trailing window and assigns ``n_train`` of them
    to training and the rest to testing.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    root = np.random.default_rng([config.seed, 0xC0FFEE])
    subjects = [f"S{i + 1}" for i in range(2 * pairs)]
    bodies = {sid: Body.random(np.random.default_rng([config.seed, 7, i])) for i, sid in enumerate(subjects)}
    order = [subjects[i] for i in root.permutation(len(subjects))]
    dyads = [tuple(order[2 * p : 2 * p + 2]) for p in range(pairs)]

    streams, entries = [], []
    for p, dyad in enumerate(dyads):
        for g in range(config.games):
            roles = dyad if g % 2 == 0 else dyad[::-1]
            schedule = build_schedule(config, roles)
            for r, sid in enumerate(roles):
                stream = synthesize_stream(
                    schedule,
                    sid,
                    config,
                    body=bodies[sid],
                    seat_x=-0.45 if sid == dyad[0] else 0.45,
                    stream_seed=[config.seed, p, g, r],
                )
                streams.append(stream)
                entries.append(
                    {
                        "path": f"streams/{sid}_pair{p + 1}_game{g + 1}.stream",
                        "participant_id": sid,
                        "pair": p + 1,
                        "game": g + 1,
                        "frames": len(stream),
                    }
                )

    candidates = np.concatenate(
        [
            np.stack([np.full(len(s) - window_frames + 1, i), np.arange(window_frames - 1, len(s))], axis=1)
            for i, s in enumerate(streams)
        ]
    )
    split_rng = np.random.default_rng([config.seed, 0x5917])
    if n_frames is None or n_frames >= len(candidates):
        chosen = candidates
    else:
        chosen = candidates[np.sort(split_rng.choice(len(candidates), size=n_frames, replace=False))]
    if not 0 < n_train < len(chosen):
        raise ValueError(f"n_train must be in (0, {len(chosen)}), got {n_train}")
    is_train = np.zeros(len(chosen), dtype=bool)
    is_train[split_rng.choice(len(chosen), size=n_train, replace=False)] = True
    train = [[int(s), int(f)] for s, f in chosen[is_train]]
    test = [[int(s), int(f)] for s, f in chosen[~is_train]]

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "game_config": config.to_dict(),
        "pairs": [list(d) for d in dyads],
        "window_frames": window_frames,
        "streams": entries,
        "label_counts": {"train": _label_counts(streams, train), "test": _label_counts(streams, test)},
        "train": train,
        "test": test,
    }
    corpus = Corpus(streams, manifest)
    if out_dir is not None:
        corpus.paths = write_corpus(corpus, out_dir)
    return corpus


def write_corpus(corpus: Corpus, out_dir) -> list:
    out = Path(out_dir)
    (out / "streams").mkdir(parents=True, exist_ok=True)
    paths = []
    for entry, stream in zip(corpus.manifest["streams"], corpus.streams):
        path = out / entry["path"]
        write_stream(path, stream)
        paths.append(path)
    (out / "manifest.json").write_text(json.dumps(corpus.manifest, indent=1, sort_keys=True) + "\n")
    return paths


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{path}: not a corpus manifest")
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"{path}: unsupported manifest version {manifest.get('version')}")
    n = len(manifest["streams"])
    for split in ("train", "test"):
        for s, f in manifest[split]:
            if not (0 <= s < n and manifest["window_frames"] - 1 <= f < manifest["streams"][s]["frames"]):
                raise ValueError(f"{path}: {split} split references invalid frame ({s}, {f})")
    return manifest
