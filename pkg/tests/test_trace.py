import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soccer_cep.scenario import generate_scenario, ScenarioSpec
from soccer_cep.trace import (AtomicEvent, EventLog, FieldGeometry, IntervalEvent, MissingObject,
                              MissingRole, NonContiguousFrames, ObjectClass, ObjectId, Team,
                              Trace, UnknownEventType, iter_trace_chunks, load_events, load_trace,
                              save_events, save_trace, validate)

from conftest import BALL, full_roster_trace, player


def write_rows(path, frames, ids=range(23), skip=()):
    lines = ["frame,object_id,class,team,goalkeeper,x,y"]
    for f in frames:
        for i in ids:
            if (f, i) in skip:
                continue
            if i == 0:
                lines.append(f"{f},0,ball,none,0,52.50,34.00")
            else:
                team = "home" if i <= 11 else "away"
                gk = int(i in (1, 12))
                lines.append(f"{f},{i},player,{team},{gk},{i * 4.0:.2f},{10 + i:.2f}")
    path.write_text("\n".join(lines) + "\n")


def test_load_two_frames(tmp_path):
    p = tmp_path / "t.csv"
    write_rows(p, [0, 1])
    tr = load_trace(p)
    assert len(tr) == 2
    assert len(tr.roster) == 23
    assert tr.ball.id == 0


def test_missing_ball_row(tmp_path):
    p = tmp_path / "t.csv"
    write_rows(p, range(8), skip={(5, 0)})
    with pytest.raises(MissingObject) as err:
        load_trace(p)
    assert err.value.frame == 5
    assert err.value.object_id == "ball"


def test_frame_gap(tmp_path):
    p = tmp_path / "t.csv"
    write_rows(p, [0, 1, 3])
    with pytest.raises(NonContiguousFrames) as err:
        load_trace(p)
    assert err.value.gap == 2


def test_event_lines(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text(json.dumps({"type": "Goal", "start": 900, "end": 900, "roles": {"Scorer": 7}}) + "\n"
                 + json.dumps({"type": "Pass", "start": 120, "end": 160,
                               "roles": {"KickingPlayer": 3, "ReceivingPlayer": 4}}) + "\n")
    log = load_events(p)
    assert [(e.event_type, e.t) for e in log.atomic] == [("Goal", 900)]
    assert [(e.event_type, e.start, e.end) for e in log.complex] == [("Pass", 120, 160)]


def test_unknown_event_type(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text(json.dumps({"type": "Nutmeg", "start": 1, "end": 1, "roles": {}}) + "\n")
    with pytest.raises(UnknownEventType) as err:
        load_events(p)
    assert err.value.name == "Nutmeg"


def test_missing_required_role(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text(json.dumps({"type": "KickingTheBall", "start": 1, "end": 1, "roles": {}}) + "\n")
    with pytest.raises(MissingRole):
        load_events(p)


def test_validate_clean_trace():
    assert validate(full_roster_trace(100)) == []


def test_validate_out_of_bounds():
    tr = full_roster_trace(5)
    pos = np.array(tr.positions)
    pos[3, 4, 0] = 9999.0
    diags = validate(tr.with_positions(pos))
    assert [(d.kind, d.frame, d.object_id) for d in diags] == [("OutOfBounds", 3, tr.roster[4].id)]


def test_validate_two_balls():
    objs = [BALL, ObjectId(50, ObjectClass.BALL, Team.NONE), player(1, keeper=True),
            player(12, Team.AWAY, keeper=True)]
    tr = Trace(np.full((3, 4, 2), 10.0), objs)
    assert [d.kind for d in validate(tr)] == ["DuplicateBall"]


def test_geometry_checks():
    with pytest.raises(ValueError):
        FieldGeometry(goal_mouth_width_m=70.0)
    with pytest.raises(ValueError):
        FieldGeometry(sideline_band_m=40.0)
    assert FieldGeometry().posts == pytest.approx((30.34, 37.66))


def test_csv_round_trip_is_byte_identical(tmp_path):
    trace, _ = generate_scenario(ScenarioSpec("Pass", seed=4))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_trace(trace, a)
    save_trace(load_trace(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_chunks_reassemble(tmp_path):
    trace, _ = generate_scenario(ScenarioSpec("Tackle", "won", seed=2))
    p = tmp_path / "t.csv"
    save_trace(trace, p)
    chunks = list(iter_trace_chunks(p, size=64))
    assert all(len(c) == 64 for c in chunks[:-1])
    assert np.array_equal(np.concatenate([c.positions for c in chunks]), load_trace(p).positions)
    assert [c.start for c in chunks] == list(range(0, len(trace), 64))


def test_event_order_stable_under_reload(tmp_path):
    _, log = generate_scenario(ScenarioSpec("PassThenGoal", seed=1))
    p = tmp_path / "e.jsonl"
    save_events(log, p)
    again = load_events(p)
    assert again == log


def test_interval_rejects_reversed_bounds():
    with pytest.raises(ValueError):
        IntervalEvent.make("Pass", 10, 5, {})


def test_duplicate_ids_rejected():
    e = AtomicEvent.make("BallOut", 4, {"Ball": 0})
    with pytest.raises(ValueError):
        EventLog((e, e))


@given(st.integers(-500, 500))
@settings(max_examples=30)
def test_shift_round_trip(delta):
    a = AtomicEvent.make("KickingTheBall", 1000, {"KickingPlayer": 3})
    c = IntervalEvent.make("Shot", 1000, 1000, {"KickingPlayer": 3}, [a.id])
    log = EventLog((a,), (c,))
    back = log.shifted(delta).shifted(-delta)
    assert back == log
