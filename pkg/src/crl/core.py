"""Value types: variables, assignments and exact distributions.

Probabilities are :class:`fractions.Fraction` throughout. Domain values are
strings as written in model files; ``magnitude`` gives their rational value.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .errors import Conflict, DomainViolation, ZeroMass

Prob = Fraction

DEFAULT_ENUM_GUARD = 2**20


def enum_guard() -> int:
    """Maximum number of assignments any enumeration may visit."""
    raw = os.environ.get("CRL_ENUM_GUARD")
    return int(raw) if raw else DEFAULT_ENUM_GUARD


class Role(enum.Enum):
    STATE = "state"
    ACTION = "action"
    REWARD = "reward"
    BELIEF = "belief"


class Slice(enum.Enum):
    CURRENT = "current"
    NEXT = "next"


@dataclass(frozen=True)
class Variable:
    name: str
    domain: tuple[str, ...]
    role: Role = Role.STATE
    slice: Slice = Slice.CURRENT

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))
        if len(self.domain) < 2:
            raise DomainViolation(f"{self.name}: domain needs at least two values")
        if len(set(self.domain)) != len(self.domain):
            raise DomainViolation(f"{self.name}: duplicate domain values")

    @property
    def card(self) -> int:
        return len(self.domain)

    def index(self, value: str) -> int:
        try:
            return self.domain.index(value)
        except ValueError:
            raise DomainViolation(f"{value!r} not in domain of {self.name}") from None


def magnitude(value: str) -> Fraction:
    """Rational value of a domain token (``"1"``, ``"-2"``, ``"1/2"``)."""
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise DomainViolation(f"value {value!r} is not numeric") from None


class Assignment(Mapping[str, str]):
    """Immutable, hashable mapping from variable names to values."""

    __slots__ = ("_data", "_key")

    def __init__(self, bindings: Mapping[str, object] | Iterable[tuple[str, object]] = (), **named: object):
        items = bindings.items() if isinstance(bindings, Mapping) else bindings
        self._data = {str(k): str(v) for k, v in items}
        self._data.update((k, str(v)) for k, v in named.items())
        self._key = tuple(sorted(self._data.items()))

    def __getitem__(self, name: str) -> str:
        return self._data[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Assignment):
            return self._key == other._key
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __lt__(self, other: "Assignment") -> bool:
        return self._key < other._key

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{k}={v}" for k, v in self._key) + "}"

    def restrict(self, names: Iterable[str]) -> "Assignment":
        names = set(names)
        return Assignment((k, v) for k, v in self._data.items() if k in names)

    def without(self, names: Iterable[str]) -> "Assignment":
        names = set(names)
        return Assignment((k, v) for k, v in self._data.items() if k not in names)

    def rename(self, mapping: Mapping[str, str]) -> "Assignment":
        return Assignment((mapping.get(k, k), v) for k, v in self._data.items())

    def agrees(self, other: Mapping[str, str]) -> bool:
        """True when every variable bound in both has the same value."""
        return all(self._data.get(k, v) == v for k, v in other.items())

    def text(self, order: Iterable[str] | None = None) -> str:
        keys = [k for k in order if k in self._data] if order is not None else [k for k, _ in self._key]
        return ",".join(f"{k}={self._data[k]}" for k in keys)


def merge(a: Mapping[str, str], b: Mapping[str, str] | Iterable[tuple[str, str]]) -> Assignment:
    out = dict(a)
    for k, v in (b.items() if isinstance(b, Mapping) else b):
        v = str(v)
        if k in out and out[k] != v:
            raise Conflict(k, out[k], v)
        out[k] = v
    return Assignment(out)


class Distribution(Mapping[Assignment, Fraction]):
    """Exact finite distribution over assignments to a fixed variable set.

    Zero-probability entries are dropped, so iteration visits the support.
    """

    __slots__ = ("_p", "variables")

    def __init__(self, probs: Mapping[Assignment, Fraction] | Iterable[tuple[Assignment, Fraction]]):
        items = probs.items() if isinstance(probs, Mapping) else probs
        table: dict[Assignment, Fraction] = {}
        for k, p in items:
            p = Fraction(p)
            if p < 0:
                raise ValueError("negative probability")
            if p:
                k = k if isinstance(k, Assignment) else Assignment(k)
                table[k] = table.get(k, Fraction(0)) + p
        if sum(table.values(), Fraction(0)) != 1:
            raise ValueError("distribution does not sum to 1")
        var_sets = {frozenset(k) for k in table}
        if len(var_sets) > 1:
            raise ValueError("support assignments cover different variable sets")
        self.variables = next(iter(var_sets)) if var_sets else frozenset()
        self._p = dict(sorted(table.items()))

    def __getitem__(self, key: Assignment) -> Fraction:
        key = key if isinstance(key, Assignment) else Assignment(key)
        return self._p.get(key, Fraction(0))

    def __iter__(self) -> Iterator[Assignment]:
        return iter(self._p)

    def __len__(self) -> int:
        return len(self._p)

    def __contains__(self, key: object) -> bool:
        return isinstance(key, Mapping) and Assignment(key) in self._p

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Distribution):
            return self._p == other._p
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    def __repr__(self) -> str:
        return "Distribution(" + ", ".join(f"{k!r}: {v}" for k, v in self._p.items()) + ")"

    def fingerprint(self) -> tuple[tuple[tuple[tuple[str, str], ...], Fraction], ...]:
        return tuple((tuple(sorted(k.items())), p) for k, p in self._p.items())

    def marginal(self, names: Iterable[str]) -> "Distribution":
        names = set(names)
        out: dict[Assignment, Fraction] = {}
        for k, p in self._p.items():
            r = k.restrict(names)
            out[r] = out.get(r, Fraction(0)) + p
        return Distribution(out)

    def prob(self, event: Mapping[str, str]) -> Fraction:
        return sum((p for k, p in self._p.items() if k.agrees(event)), Fraction(0))

    @staticmethod
    def point(assignment: Mapping[str, str]) -> "Distribution":
        return Distribution({Assignment(assignment): Fraction(1)})


def normalize(weights: Mapping[Assignment, Fraction]) -> Distribution:
    total = sum((Fraction(w) for w in weights.values()), Fraction(0))
    if total == 0:
        raise ZeroMass("all weights are zero")
    return Distribution({k: Fraction(w) / total for k, w in weights.items()})
