import re

import pytest
from hypothesis import given, settings, strategies as st

from soccer_cep.atomic import detect_atomic
from soccer_cep.dsl import (CyclicDependency, RuleError, RuleSyntaxError, UnknownEvent,
                            UnknownRole, builtin_rules, builtin_source, compile_source, parse,
                            pretty)
from soccer_cep.scenario import ScenarioSpec, generate_scenario
from soccer_cep.spatial import SpatialContext
from soccer_cep.temporal import detect_complex

PASS = ("complex Pass: seq(KickingTheBall as k, BallPossession as p) within 90 "
        "where team(k.KickingPlayer) == team(p.PossessingPlayer) "
        "and k.KickingPlayer != p.PossessingPlayer "
        "emit roles {KickingPlayer: k.KickingPlayer, ReceivingPlayer: p.PossessingPlayer}")


def test_single_rule():
    rules = parse(PASS)
    assert len(rules) == 1 and rules[0].name == "Pass"


def test_empty_source():
    assert parse("") == []
    assert parse("# nothing here\n\n") == []


def test_seq_needs_two_operands():
    with pytest.raises(RuleSyntaxError):
        parse("complex X: seq(KickingTheBall) within 5 emit roles {}")


def test_builtins_compile():
    # the rule file splits SavedShot out of Shot, hence one more than the twelve outcome types
    rules = builtin_rules()
    assert len(rules.event_types) == 13
    assert {"Pass", "Cross", "FilteringPass", "Tackle", "SavedShot"} <= set(rules.event_types)


def test_unknown_role_is_located():
    src = PASS.replace("k.KickingPlayer != p", "k.Striker != p")
    with pytest.raises(UnknownRole) as err:
        compile_source(src)
    assert err.value.line == 1
    assert src[err.value.col - 1:].startswith("Striker")


def test_cycle():
    src = ("complex A: B as b emit roles {KickingPlayer: b.KickingPlayer}\n"
           "complex B: A as a emit roles {KickingPlayer: a.KickingPlayer}\n")
    with pytest.raises(CyclicDependency):
        compile_source(src)


def test_builtin_source_parses():
    assert len(parse(builtin_source())) == 13


def test_pass_then_goal_from_builtins():
    trace, _ = generate_scenario(ScenarioSpec("PassThenGoal", seed=4))
    out = detect_complex(detect_atomic(trace), builtin_rules(), SpatialContext.from_trace(trace))
    assert [e.event_type for e in out].count("PassThenGoal") == 1


def test_missing_pass_rule():
    src = re.sub(r"complex Pass:.*?(?=\n\n)", "", builtin_source(), count=1, flags=re.S)
    with pytest.raises(UnknownEvent) as err:
        compile_source(src)
    assert "Pass" in str(err.value)


def test_pretty_print_fixed_point():
    asts = parse(builtin_source())
    assert parse(pretty(asts)) == asts


SOURCE = builtin_source()


@given(st.integers(0, len(SOURCE) - 1), st.integers(1, 12), st.sampled_from(["", " ", "(", ")", "x", "9", ".", "=="]))
@settings(max_examples=150, deadline=None)
def test_mutated_sources(at, width, filler):
    src = SOURCE[:at] + filler + SOURCE[at + width:]
    lines = src.split("\n")
    try:
        asts = parse(src)
    except RuleError as err:
        assert 1 <= err.line <= len(lines)
        assert 1 <= err.col <= len(lines[err.line - 1]) + 1
        return
    assert parse(pretty(asts)) == asts
    try:
        compile_source(src)
    except RuleError as err:
        assert 1 <= err.line <= len(lines)
