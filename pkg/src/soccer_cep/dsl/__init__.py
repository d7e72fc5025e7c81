"""Declarative rule language for complex events (``.cer`` files)."""

from importlib import resources

from .compiler import (CyclicDependency, EventSchema, TypeMismatch, UnknownEvent,
                       UnknownRole, check_and_compile, default_schema)
from .syntax import RuleAst, RuleError, RuleSyntaxError, format_rule, parse, pretty


def builtin_source() -> str:
    return resources.files(__package__).joinpath("builtin.cer").read_text(encoding="utf-8")


def builtin_rules():
    return check_and_compile(parse(builtin_source()))


def compile_source(source: str):
    return check_and_compile(parse(source))


__all__ = [
    "CyclicDependency", "EventSchema", "RuleAst", "RuleError", "RuleSyntaxError",
    "TypeMismatch", "UnknownEvent", "UnknownRole", "builtin_rules", "builtin_source",
    "check_and_compile", "compile_source", "default_schema", "format_rule", "parse", "pretty",
]
