from __future__ import annotations

import numpy as np
import pytest

from soccer_cep.scenario import generate_sequence, roster, scenario_suite
from soccer_cep.trace import ObjectClass, ObjectId, Team, Trace

BALL = ObjectId(0, ObjectClass.BALL, Team.NONE)


def player(pid: int, team: Team = Team.HOME, keeper: bool = False) -> ObjectId:
    return ObjectId(pid, ObjectClass.PLAYER, team, keeper)


def hand_trace(tracks: dict[ObjectId, np.ndarray], fps: float = 30.0, start: int = 0) -> Trace:
    """Trace from per-object ``(n, 2)`` arrays (a single point is held still)."""
    n = max(len(np.atleast_2d(v)) for v in tracks.values())
    objs = sorted(tracks)
    pos = np.zeros((n, len(objs), 2))
    for i, o in enumerate(objs):
        v = np.atleast_2d(np.asarray(tracks[o], float))
        pos[:, i] = v if len(v) == n else np.repeat(v[:1], n, axis=0)
    return Trace(pos, objs, fps=fps, start=start)


def linear(p0, p1, n: int) -> np.ndarray:
    return np.linspace(np.asarray(p0, float), np.asarray(p1, float), n)


def full_roster_trace(n: int = 10, fps: float = 30.0) -> Trace:
    """Generator roster spread over the pitch, everyone still."""
    objs = roster()
    rng = np.random.default_rng(0)
    pos = np.empty((n, len(objs), 2))
    pos[:] = rng.uniform([5, 5], [100, 63], (len(objs), 2))
    return Trace(pos, objs, fps=fps)


@pytest.fixture(scope="session")
def suite_match():
    """The 224-scenario noise-free match used by the oracle tests."""
    specs = scenario_suite(224, seed=0)
    trace, log, offsets = generate_sequence(specs)
    return specs, trace, log, offsets


@pytest.fixture(scope="session")
def small_match():
    specs = scenario_suite(28, seed=3)
    trace, log, offsets = generate_sequence(specs)
    return specs, trace, log, offsets


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one verdict line per acceptance criterion."""
    def record(number, ok, detail):
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"ACCEPTANCE {number}: {verdict}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
