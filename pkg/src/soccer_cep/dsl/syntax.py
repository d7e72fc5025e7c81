"""Lexer, AST, recursive-descent parser and printer for ``.cer`` rule files.

Grammar (``#`` starts a comment)::

    file     := rule*
    rule     := "complex" NAME ":" pattern
                ["within" INT] ["duration" INT ".." INT]
                ["where" expr] ["emit" "roles" "{" [emit ("," emit)*] "}"]
    pattern  := ("seq" | "and" | "or") "(" operand ("," operand)* ")" | operand
    operand  := NAME ("|" NAME)* "as" NAME
    emit     := NAME ":" value
    expr     := conj ("or" conj)*
    conj     := neg ("and" neg)*
    neg      := "not" neg | cmp
    cmp      := value [("==" | "!=") value]
    value    := NAME "(" [expr ("," expr)*] ")" | NAME "." NAME | NAME | INT
              | "(" expr ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union


class RuleError(Exception):
    """A rule-file problem tied to a source position (1-based line and column)."""

    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}")


class RuleSyntaxError(RuleError):
    def __init__(self, line: int, col: int, expected: tuple[str, ...] | str, found: str = ""):
        self.expected = (expected,) if isinstance(expected, str) else tuple(expected)
        msg = "expected " + " or ".join(self.expected)
        if found:
            msg += f", found {found}"
        super().__init__(msg, line, col)


KEYWORDS = {"complex", "seq", "and", "or", "not", "within", "where", "emit", "roles",
            "as", "duration"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|\.\.|[():,.{}|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str    # NAME, INT, KW, OP, EOF
    text: str
    line: int
    col: int

    def describe(self) -> str:
        return "end of input" if self.kind == "EOF" else repr(self.text)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise RuleSyntaxError(line, pos - line_start + 1, "a token",
                                  repr(source[pos]))
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            tokens.append(Token("INT", text, line, col))
        elif kind == "name":
            tokens.append(Token("KW" if text in KEYWORDS else "NAME", text, line, col))
        elif kind == "op":
            tokens.append(Token("OP", text, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


# -- AST ----------------------------------------------------------------------

Pos = tuple[int, int]


@dataclass(frozen=True)
class Int:
    value: int
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Name:
    ident: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class RoleRef:
    var: str
    role: str
    pos: Pos = field(default=(0, 0), compare=False)
    role_pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Not:
    arg: "Expr"
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BoolOp:
    op: str   # "and" | "or"
    args: tuple["Expr", ...]
    pos: Pos = field(default=(0, 0), compare=False)


Expr = Union[Int, Name, RoleRef, Call, Compare, Not, BoolOp]


@dataclass(frozen=True)
class OperandNode:
    types: tuple[str, ...]
    name: str
    pos: Pos = field(default=(0, 0), compare=False)
    type_pos: tuple[Pos, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class PatternNode:
    op: str   # "seq" | "and" | "or" | "filter"
    operands: tuple[OperandNode, ...]
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class RuleAst:
    name: str
    pattern: PatternNode
    within: int | None = None
    duration: tuple[int, int] | None = None
    where: Expr | None = None
    emit: tuple[tuple[str, Expr], ...] = ()
    pos: Pos = field(default=(0, 0), compare=False)


# -- parser -------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("KW", "OP") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def expect_kind(self, kind: str, label: str) -> Token:
        if self.tok.kind != kind:
            self.fail(label)
        return self.advance()

    def fail(self, *expected: str):
        t = self.tok
        raise RuleSyntaxError(t.line, t.col, expected, t.describe())

    def parse_file(self) -> list[RuleAst]:
        rules = []
        while self.tok.kind != "EOF":
            rules.append(self.parse_rule())
        return rules

    def parse_rule(self) -> RuleAst:
        start = self.expect("complex")
        name = self.expect_kind("NAME", "a rule name").text
        self.expect(":")
        pattern = self.parse_pattern()
        within = duration = where = None
        emit: tuple = ()
        if self.at("within"):
            self.advance()
            within = int(self.expect_kind("INT", "a frame count").text)
        if self.at("duration"):
            self.advance()
            lo = int(self.expect_kind("INT", "a frame count").text)
            self.expect("..")
            hi = int(self.expect_kind("INT", "a frame count").text)
            duration = (lo, hi)
        if self.at("where"):
            self.advance()
            where = self.parse_expr()
        if self.at("emit"):
            self.advance()
            self.expect("roles")
            self.expect("{")
            items = []
            if not self.at("}"):
                items.append(self.parse_emit())
                while self.at(","):
                    self.advance()
                    items.append(self.parse_emit())
            self.expect("}")
            emit = tuple(items)
        if self.tok.kind != "EOF" and not self.at("complex"):
            self.fail("'within'", "'duration'", "'where'", "'emit'", "'complex'",
                      "end of input")
        return RuleAst(name, pattern, within, duration, where, emit, (start.line, start.col))

    def parse_emit(self):
        role = self.expect_kind("NAME", "a role name").text
        self.expect(":")
        return role, self.parse_value()

    def parse_pattern(self) -> PatternNode:
        t = self.tok
        if t.kind == "KW" and t.text in ("seq", "and", "or"):
            self.advance()
            self.expect("(")
            ops = [self.parse_operand()]
            while self.at(","):
                self.advance()
                ops.append(self.parse_operand())
            close = self.tok
            self.expect(")")
            if t.text == "seq" and len(ops) < 2:
                raise RuleSyntaxError(close.line, close.col, "',' and a second seq operand",
                                      close.describe())
            return PatternNode(t.text, tuple(ops), (t.line, t.col))
        if t.kind != "NAME":
            self.fail("'seq'", "'and'", "'or'", "an event type")
        return PatternNode("filter", (self.parse_operand(),), (t.line, t.col))

    def parse_operand(self) -> OperandNode:
        first = self.expect_kind("NAME", "an event type")
        types, poss = [first.text], [(first.line, first.col)]
        while self.at("|"):
            self.advance()
            t = self.expect_kind("NAME", "an event type")
            types.append(t.text)
            poss.append((t.line, t.col))
        self.expect("as")
        name = self.expect_kind("NAME", "an operand name").text
        return OperandNode(tuple(types), name, (first.line, first.col), tuple(poss))

    def parse_expr(self) -> Expr:
        t = self.tok
        args = [self.parse_conj()]
        while self.at("or"):
            self.advance()
            args.append(self.parse_conj())
        return args[0] if len(args) == 1 else BoolOp("or", tuple(args), (t.line, t.col))

    def parse_conj(self) -> Expr:
        t = self.tok
        args = [self.parse_neg()]
        while self.at("and"):
            self.advance()
            args.append(self.parse_neg())
        return args[0] if len(args) == 1 else BoolOp("and", tuple(args), (t.line, t.col))

    def parse_neg(self) -> Expr:
        if self.at("not"):
            t = self.advance()
            return Not(self.parse_neg(), (t.line, t.col))
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        left = self.parse_value()
        if self.at("==") or self.at("!="):
            t = self.advance()
            right = self.parse_value()
            return Compare(t.text, left, right, (t.line, t.col))
        return left

    def parse_value(self) -> Expr:
        t = self.tok
        if t.kind == "INT":
            self.advance()
            return Int(int(t.text), (t.line, t.col))
        if self.at("("):
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind != "NAME":
            self.fail("a name", "an integer", "'('")
        self.advance()
        if self.at("("):
            self.advance()
            args = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.at(","):
                    self.advance()
                    args.append(self.parse_expr())
            self.expect(")")
            return Call(t.text, tuple(args), (t.line, t.col))
        if self.at("."):
            self.advance()
            r = self.expect_kind("NAME", "a role name")
            return RoleRef(t.text, r.text, (t.line, t.col), (r.line, r.col))
        return Name(t.text, (t.line, t.col))


def parse(source: str) -> list[RuleAst]:
    return _Parser(source).parse_file()


# -- printer ------------------------------------------------------------------

_PREC = {"or": 1, "and": 2}


def format_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Int):
        return str(e.value)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, RoleRef):
        return f"{e.var}.{e.role}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Compare):
        return f"{format_expr(e.left, 9)} {e.op} {format_expr(e.right, 9)}"
    if isinstance(e, Not):
        return f"not {format_expr(e.arg, 3)}"
    if isinstance(e, BoolOp):
        p = _PREC[e.op]
        text = f" {e.op} ".join(format_expr(a, p + 1) for a in e.args)
        return f"({text})" if parent > p else text
    raise TypeError(e)


def _format_operand(o: OperandNode) -> str:
    return f"{' | '.join(o.types)} as {o.name}"


def format_rule(rule: RuleAst) -> str:
    p = rule.pattern
    if p.op == "filter":
        pat = _format_operand(p.operands[0])
    else:
        pat = f"{p.op}({', '.join(_format_operand(o) for o in p.operands)})"
    lines = [f"complex {rule.name}:", f"    {pat}"]
    if rule.within is not None:
        lines[-1] += f" within {rule.within}"
    if rule.duration is not None:
        lines.append(f"    duration {rule.duration[0]}..{rule.duration[1]}")
    if rule.where is not None:
        lines.append(f"    where {format_expr(rule.where)}")
    if rule.emit:
        items = ", ".join(f"{r}: {format_expr(v)}" for r, v in rule.emit)
        lines.append(f"    emit roles {{{items}}}")
    return "\n".join(lines) + "\n"


def pretty(rules: list[RuleAst]) -> str:
    return "\n".join(format_rule(r) for r in rules)


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Call):
        for a in e.args:
            yield from walk(a)
    elif isinstance(e, Compare):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Not):
        yield from walk(e.arg)
    elif isinstance(e, BoolOp):
        for a in e.args:
            yield from walk(a)
