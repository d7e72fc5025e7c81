"""Semantic checks and compilation of rule ASTs into interval patterns."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from ..spatial import TEAM_ZONES, ZONES, beyond_defence_line, in_zone, on_target
from ..temporal import CompiledRuleSet, IntervalPattern, Operand
from ..trace import ANCHOR_ROLE, ATOMIC_ROLES, ObjectClass
from .syntax import (BoolOp, Call, Compare, Expr, Int, Name, Not, RoleRef, RuleAst,
                     RuleError)


class UnknownEvent(RuleError):
    pass


class UnknownRole(RuleError):
    pass


class TypeMismatch(RuleError):
    pass


class CyclicDependency(RuleError):
    pass


PLAYER, BALL, TEAM, BOOL, FRAME, EVENT, ZONE, INT = (
    "player", "ball", "team", "bool", "frame", "event", "zone", "int")


@dataclass(frozen=True)
class EventSchema:
    roles: Mapping[str, Mapping[str, str]]    # event type -> role -> player|ball
    anchors: Mapping[str, str]                # event type -> actor role

    def extended(self, name: str, roles: Mapping[str, str]) -> "EventSchema":
        anchor = next((r for r, t in roles.items() if t == PLAYER), None)
        anchors = dict(self.anchors)
        if anchor is not None:
            anchors[name] = anchor
        else:
            anchors.pop(name, None)
        return EventSchema({**self.roles, name: dict(roles)}, anchors)


def default_schema() -> EventSchema:
    roles = {t: {r: (PLAYER if c is ObjectClass.PLAYER else BALL) for r, c in rs.items()}
             for t, rs in ATOMIC_ROLES.items()}
    roles["TackleRun"] = {"PossessingPlayer": PLAYER, "TacklingPlayer": PLAYER}
    anchors = dict(ANCHOR_ROLE)
    anchors["TackleRun"] = "PossessingPlayer"
    return EventSchema(roles, anchors)


Value = Callable[[Mapping, object], object]


class _RuleChecker:
    def __init__(self, rule: RuleAst, schema: EventSchema):
        self.rule = rule
        self.schema = schema
        self.vars: dict[str, tuple[str, ...]] = {}
        for o in rule.pattern.operands:
            for t, pos in zip(o.types, o.type_pos or [o.pos] * len(o.types)):
                if t not in schema.roles:
                    raise UnknownEvent(f"unknown event type {t!r}", *pos)
            if o.name in self.vars:
                raise TypeMismatch(f"operand name {o.name!r} bound twice", *o.pos)
            self.vars[o.name] = o.types

    # each check returns (type, evaluator)
    def check(self, e: Expr) -> tuple[str, Value]:
        if isinstance(e, Int):
            v = e.value
            return INT, lambda b, ctx: v
        if isinstance(e, Name):
            if e.ident in self.vars:
                name = e.ident
                return EVENT, lambda b, ctx: b.get(name)
            if e.ident in ZONES:
                z = e.ident
                return ZONE, lambda b, ctx: z
            raise TypeMismatch(f"{e.ident!r} is neither an operand nor a zone", *e.pos)
        if isinstance(e, RoleRef):
            if e.var not in self.vars:
                raise TypeMismatch(f"unknown operand {e.var!r}", *e.pos)
            kinds = set()
            for t in self.vars[e.var]:
                roles = self.schema.roles[t]
                if e.role not in roles:
                    raise UnknownRole(f"event {t} has no role {e.role!r}", *e.role_pos)
                kinds.add(roles[e.role])
            if len(kinds) != 1:
                raise TypeMismatch(f"role {e.role!r} has different types across alternatives", *e.pos)
            var, role = e.var, e.role

            def get_role(b, ctx):
                ev = b.get(var)
                return None if ev is None else ev.roles.get(role)
            return kinds.pop(), get_role
        if isinstance(e, Compare):
            lt, lf = self.check(e.left)
            rt, rf = self.check(e.right)
            if lt != rt or lt in (ZONE, EVENT):
                raise TypeMismatch(f"cannot compare {lt} with {rt}", *e.pos)
            eq = e.op == "=="

            def cmp(b, ctx):
                l, r = lf(b, ctx), rf(b, ctx)
                if l is None or r is None:
                    return False
                return (l == r) if eq else (l != r)
            return BOOL, cmp
        if isinstance(e, Not):
            t, f = self.check(e.arg)
            self._want(t, BOOL, e.arg)
            return BOOL, lambda b, ctx: not f(b, ctx)
        if isinstance(e, BoolOp):
            fs = []
            for a in e.args:
                t, f = self.check(a)
                self._want(t, BOOL, a)
                fs.append(f)
            if e.op == "and":
                return BOOL, lambda b, ctx: all(f(b, ctx) for f in fs)
            return BOOL, lambda b, ctx: any(f(b, ctx) for f in fs)
        if isinstance(e, Call):
            return self.check_call(e)
        raise TypeError(e)

    def _want(self, got: str, want: str | tuple[str, ...], e: Expr):
        wants = (want,) if isinstance(want, str) else want
        if got not in wants:
            pos = getattr(e, "pos", (0, 0))
            raise TypeMismatch(f"expected {' or '.join(wants)}, got {got}", *pos)

    def _args(self, e: Call, *kinds):
        if len(e.args) != len(kinds):
            raise TypeMismatch(f"{e.fn} takes {len(kinds)} argument(s), got {len(e.args)}", *e.pos)
        out = []
        for a, k in zip(e.args, kinds):
            t, f = self.check(a)
            self._want(t, k, a)
            out.append((t, f))
        return out

    def _event_types(self, arg: Expr) -> tuple[str, ...]:
        return self.vars[arg.ident] if isinstance(arg, Name) and arg.ident in self.vars else ()

    def check_call(self, e: Call) -> tuple[str, Value]:
        fn = e.fn
        if fn == "team":
            [(_, f)] = self._args(e, PLAYER)
            return TEAM, lambda b, ctx: None if (p := f(b, ctx)) is None else ctx.team(p)
        if fn == "is_goalkeeper":
            [(_, f)] = self._args(e, PLAYER)
            return BOOL, lambda b, ctx: (p := f(b, ctx)) is not None and ctx.is_goalkeeper(p)
        if fn in ("start", "end"):
            [(_, f)] = self._args(e, EVENT)
            attr = fn
            return FRAME, lambda b, ctx: None if (ev := f(b, ctx)) is None else getattr(ev, attr)
        if fn == "actor":
            [(_, f)] = self._args(e, EVENT)
            for t in self._event_types(e.args[0]):
                if t not in self.schema.anchors:
                    raise TypeMismatch(f"event {t} has no acting player", *e.args[0].pos)
            anchors = self.schema.anchors
            return PLAYER, lambda b, ctx: (None if (ev := f(b, ctx)) is None
                                           else ev.roles.get(anchors[ev.event_type]))
        if fn == "zone":
            (ot, of), (_, zf), (_, ff) = self._args(e, (PLAYER, BALL), ZONE, FRAME)
            zone = e.args[1].ident
            if zone in TEAM_ZONES and ot != PLAYER:
                raise TypeMismatch(f"zone {zone!r} is team-relative and needs a player", *e.args[0].pos)

            def zone_fn(b, ctx):
                o, fr = of(b, ctx), ff(b, ctx)
                return o is not None and fr is not None and in_zone(ctx, o, zone, fr)
            return BOOL, zone_fn
        if fn == "nearest_to_goal_among_opponents":
            [(_, pf), (_, ff)] = self._args(e, PLAYER, FRAME)

            def beyond(b, ctx):
                p, fr = pf(b, ctx), ff(b, ctx)
                return p is not None and fr is not None and beyond_defence_line(ctx, p, fr)
            return BOOL, beyond
        if fn == "on_target":
            [(_, f)] = self._args(e, EVENT)
            for t in self._event_types(e.args[0]):
                if "KickingPlayer" not in self.schema.roles[t]:
                    raise TypeMismatch(f"on_target needs a kick, {t} has no KickingPlayer",
                                       *e.args[0].pos)

            def shot(b, ctx):
                ev = f(b, ctx)
                if ev is None or "KickingPlayer" not in ev.roles:
                    return False
                return on_target(ctx, ev.roles["KickingPlayer"], ev.start)
            return BOOL, shot
        raise TypeMismatch(f"unknown function {fn!r}", *e.pos)


_OPS = {"seq": "SEQ", "and": "AND", "or": "OR", "filter": "FILTER"}


def _compile_rule(rule: RuleAst, schema: EventSchema) -> tuple[IntervalPattern, dict[str, str]]:
    chk = _RuleChecker(rule, schema)
    constraints = []
    if rule.where is not None:
        t, f = chk.check(rule.where)
        chk._want(t, BOOL, rule.where)
        constraints.append(f)
    emit, emit_types = {}, {}
    for role, value in rule.emit:
        t, f = chk.check(value)
        chk._want(t, (PLAYER, BALL), value)
        emit[role] = f
        emit_types[role] = t
    pattern = IntervalPattern(
        _OPS[rule.pattern.op],
        tuple(Operand(o.name, o.types) for o in rule.pattern.operands),
        rule.within, rule.duration, tuple(constraints), emit)
    return pattern, emit_types


def check_and_compile(asts: list[RuleAst], schema: EventSchema | None = None) -> CompiledRuleSet:
    schema = schema or default_schema()
    by_name: dict[str, RuleAst] = {}
    for r in asts:
        if r.name in by_name:
            raise TypeMismatch(f"rule {r.name!r} defined twice", *r.pos)
        by_name[r.name] = r
    deps = {r.name: {t for o in r.pattern.operands for t in o.types if t in by_name}
            for r in asts}
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(name: str, stack: list[str]):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            cycle = stack[stack.index(name):] + [name]
            r = by_name[name]
            raise CyclicDependency("cyclic dependency " + " -> ".join(cycle), *r.pos)
        state[name] = 1
        for d in sorted(deps[name]):
            visit(d, stack + [name])
        state[name] = 2
        order.append(name)

    for r in asts:
        visit(r.name, [])
    compiled = []
    for name in order:
        pattern, roles = _compile_rule(by_name[name], schema)
        schema = schema.extended(name, roles)
        compiled.append((name, pattern))
    return CompiledRuleSet(tuple(compiled))
