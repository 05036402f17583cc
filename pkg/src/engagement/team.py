"""Team-level aggregation of participant engagement states."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .states import EngagementState

DEFAULT_ALERT_THRESHOLD = 0.40


@dataclass(frozen=True)
class TeamSnapshot:
    timestamp: float
    per_participant: dict
    distribution: dict
    mean_state: float
    disengaged_fraction: float
    alert: bool

    @property
    def n_participants(self) -> int:
        return len(self.per_participant)

    def to_record(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "N": self.n_participants,
            "counts": [self.distribution[s] for s in range(1, 7)],
            "mean_state": self.mean_state,
            "disengaged_fraction": self.disengaged_fraction,
            "alert": self.alert,
        }


def aggregate(states: dict, timestamp: float = 0.0, alert_threshold: float = DEFAULT_ALERT_THRESHOLD) -> TeamSnapshot:
    """Summarize one instant: state histogram, mean state, disengagement alert.

    The alert fires only when strictly more than ``alert_threshold`` of the
    participants are disengaged.
    """
    if not states:
        raise ValueError("cannot aggregate an empty participant set")
    if not 0.0 <= alert_threshold <= 1.0:
        raise ValueError("alert_threshold must lie in [0, 1]")
    per = {pid: EngagementState(int(s)) for pid, s in states.items()}
    distribution = {s: 0 for s in range(1, 7)}
    for s in per.values():
        distribution[int(s)] += 1
    n = len(per)
    mean_state = math.fsum(int(s) for s in per.values()) / n
    disengaged = distribution[int(EngagementState.DISENGAGEMENT)] / n
    return TeamSnapshot(float(timestamp), per, distribution, mean_state, disengaged, disengaged > alert_threshold)


def align_streams(results: dict, period_s: float = 1.0, alert_threshold: float = DEFAULT_ALERT_THRESHOLD) -> list:
    """Sample participants onto a common clock.

    ``results`` maps participant id to that participant's time-ordered
    FrameResults. Snapshots are taken every ``period_s`` seconds from the
    earliest result to the latest; each participant contributes their most
    recent ``final_state`` at or before the snapshot time (sample and hold),
    and participants with no result yet are left out.
    """
    if not period_s > 0:
        raise ValueError(f"period must be positive, got {period_s}")
    series = {pid: list(rs) for pid, rs in results.items() if rs}
    if not series:
        raise ValueError("need at least one participant with at least one result")
    start = min(rs[0].timestamp for rs in series.values())
    end = max(rs[-1].timestamp for rs in series.values())
    # Slack so frame times like 0.1 + 0.2 still land on the intended side.
    slack = 1e-9 * max(1.0, abs(end))
    cursors = {pid: -1 for pid in series}
    snapshots = []
    k = 0
    while True:
        t = start + k * period_s
        if t > end + slack:
            break
        current = {}
        for pid, rs in series.items():
            i = cursors[pid]
            while i + 1 < len(rs) and rs[i + 1].timestamp <= t + slack:
                i += 1
            cursors[pid] = i
            if i >= 0:
                current[pid] = rs[i].final_state
        snapshots.append(aggregate(current, t, alert_threshold))
        k += 1
    return snapshots


def write_snapshots(snapshots, fh) -> None:
    for snap in snapshots:
        fh.write(json.dumps(snap.to_record(), sort_keys=True) + "\n")
