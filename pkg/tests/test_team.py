import io
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from engagement.pipeline import FrameResult
from engagement.states import EngagementState
from engagement.team import aggregate, align_streams, write_snapshots


def recount(states, threshold=0.40):
    """Brute-force oracle: count by hand, compare fractions with integers."""
    values = list(states.values())
    n = len(values)
    dist = {s: sum(1 for v in values if v == s) for s in range(1, 7)}
    mean = sum(values) / n
    # 'more than threshold' as a cross-multiplied integer comparison
    alert = dist[1] * 100 > round(threshold * 100) * n
    return dist, mean, dist[1] / n, alert


def test_examples():
    snap = aggregate({"A": 1, "B": 1, "C": 1, "D": 2, "E": 5})
    assert {k: v for k, v in snap.distribution.items() if v} == {1: 3, 2: 1, 5: 1}
    assert snap.mean_state == 2.0
    assert snap.disengaged_fraction == pytest.approx(0.6)
    assert snap.alert
    snap = aggregate({"A": 1, "B": 4, "C": 4, "D": 4, "E": 4})
    assert snap.disengaged_fraction == pytest.approx(0.2)
    assert not snap.alert
    boundary = aggregate({"A": 1, "B": 1, "C": 4, "D": 4, "E": 5})
    assert boundary.disengaged_fraction == pytest.approx(0.4)
    assert not boundary.alert


def test_brute_force_recount_all_small_teams():
    cases = 0
    for n in range(1, 6):
        for combo in itertools.product((1, 4, 5), repeat=n):
            states = {f"P{i}": s for i, s in enumerate(combo)}
            snap = aggregate(states)
            dist, mean, frac, alert = recount(states)
            assert snap.distribution == dist
            assert snap.mean_state == pytest.approx(mean, abs=1e-9)
            assert snap.disengaged_fraction == pytest.approx(frac, abs=1e-12)
            assert snap.alert == alert
            assert sum(snap.distribution.values()) == n
            cases += 1
    assert cases == 3 + 9 + 27 + 81 + 243


def test_brute_force_recount_six_state_teams_up_to_six():
    for n in range(1, 7):
        for combo in itertools.product(range(1, 7), repeat=n):
            states = dict(enumerate(combo))
            snap = aggregate(states)
            dist, mean, _, alert = recount(states)
            assert snap.distribution == dist and snap.alert == alert
            assert abs(snap.mean_state - mean) <= 1e-9


team = st.dictionaries(st.text(min_size=1, max_size=4), st.integers(1, 6), min_size=1, max_size=12)


@hsettings(max_examples=300)
@given(team, st.randoms())
def test_permutation_invariance_and_bounds(states, rnd):
    ids = list(states)
    shuffled = ids[:]
    rnd.shuffle(shuffled)
    renamed = {new: states[old] for old, new in zip(ids, shuffled)}
    a, b = aggregate(states), aggregate(renamed)
    assert (a.distribution, a.mean_state, a.alert) == (b.distribution, b.mean_state, b.alert)
    assert 1 <= a.mean_state <= 6


@hsettings(max_examples=300)
@given(team)
def test_adding_disengaged_never_clears_alert(states):
    before = aggregate(states)
    after = aggregate({**states, "__new__": 1})
    assert not (before.alert and not after.alert)


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate({})
    with pytest.raises(ValueError):
        aggregate({"A": 7})
    with pytest.raises(ValueError):
        aggregate({"A": 1}, alert_threshold=1.5)


def _results(pid, times, state):
    s = EngagementState(state)
    return [FrameResult(float(t), pid, s, s, 0.0, 1.0) for t in times]


def test_align_single_participant():
    snaps = align_streams({"A": _results("A", np.arange(300) / 30, 4)}, period_s=1.0)
    assert len(snaps) == 10
    assert all(s.mean_state == 4.0 and s.n_participants == 1 for s in snaps)
    assert [s.timestamp for s in snaps] == pytest.approx(list(range(10)))


def test_align_offset_participants():
    # hand-traced: A reports from 0.0, B from 0.5; snapshots at 0,1,2,...
    a = _results("A", np.arange(0, 5, 0.1), 1)
    b = _results("B", np.arange(0.5, 5.5, 0.1), 4)
    snaps = align_streams({"A": a, "B": b})
    assert [s.timestamp for s in snaps] == pytest.approx([0, 1, 2, 3, 4, 5])
    assert snaps[0].per_participant == {"A": EngagementState(1)}
    for s in snaps[1:]:
        assert set(s.per_participant) == {"A", "B"}
        assert s.mean_state == 2.5


def test_align_sample_and_hold():
    a = _results("A", np.arange(0, 10, 0.5), 4)
    b = _results("B", np.arange(0, 3, 0.5), 1) + _results("B", [3.0], 5)
    snaps = align_streams({"A": a, "B": b})
    assert len(snaps) == 10
    assert all(s.per_participant["B"] == 5 for s in snaps[3:])
    assert snaps[2].per_participant["B"] == 1


def test_align_errors():
    with pytest.raises(ValueError):
        align_streams({}, 1.0)
    with pytest.raises(ValueError):
        align_streams({"A": _results("A", [0.0], 1)}, 0.0)


def test_snapshot_records():
    buf = io.StringIO()
    write_snapshots([aggregate({"A": 1, "B": 4}, 2.0)], buf)
    record = json.loads(buf.getvalue())
    assert record == {
        "timestamp": 2.0, "N": 2, "counts": [1, 0, 0, 1, 0, 0],
        "mean_state": 2.5, "disengaged_fraction": 0.5, "alert": True,
    }
