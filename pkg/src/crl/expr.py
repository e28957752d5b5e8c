"""Arithmetic expressions over parent references and rational constants."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Ref, BinOp]

PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def evaluate(e: Expr, env: Mapping[str, Fraction]) -> Fraction:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Ref):
        return env[e.name]
    a, b = evaluate(e.left, env), evaluate(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    return a * b


def names(e: Expr) -> set[str]:
    if isinstance(e, Ref):
        return {e.name}
    if isinstance(e, BinOp):
        return names(e.left) | names(e.right)
    return set()


def leaves(e: Expr) -> list[Expr]:
    if isinstance(e, BinOp):
        return leaves(e.left) + leaves(e.right)
    return [e]


def rational_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def to_text(e: Expr) -> str:
    """Minimal-parenthesis rendering that parses back to the same tree."""
    if isinstance(e, Num):
        return rational_text(e.value)
    if isinstance(e, Ref):
        return e.name
    p = PRECEDENCE[e.op]
    left = to_text(e.left)
    if isinstance(e.left, BinOp) and PRECEDENCE[e.left.op] < p:
        left = f"({left})"
    right = to_text(e.right)
    if isinstance(e.right, BinOp) and PRECEDENCE[e.right.op] <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"
