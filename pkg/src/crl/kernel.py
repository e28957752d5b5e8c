"""Backend selection for the enumeration kernel.

The compiled module is used when it imports and the model's common
denominator fits in int64; otherwise the pure-Python kernel runs. Setting
``CRL_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from typing import Mapping, Sequence

from . import _enum_py

try:
    from . import _enum_c
except ImportError:  # extension not built
    _enum_c = None

INT64_LIMIT = 2**62

_state = {"backend": "python" if (_enum_c is None or os.environ.get("CRL_PURE_PYTHON")) else "compiled"}


def available() -> tuple[str, ...]:
    return ("python", "compiled") if _enum_c is not None else ("python",)


def backend() -> str:
    return _state["backend"]


def set_backend(name: str) -> None:
    if name not in available():
        raise ValueError(f"backend {name!r} unavailable; have {available()}")
    _state["backend"] = name


@contextmanager
def using(name: str):
    previous = backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def joint_weights(cards: Sequence[int], factors: Sequence[tuple[Sequence[int], Sequence[int]]], denominator: int):
    if backend() == "compiled" and denominator < INT64_LIMIT:
        return _enum_c.joint_weights(list(cards), [(tuple(s), list(t)) for s, t in factors])
    return _enum_py.joint_weights(cards, factors)


def project(weights, cards: Sequence[int], fixed: Mapping[int, int], keep: Sequence[int]) -> list[int]:
    if _enum_c is not None and not isinstance(weights, list):
        return _enum_c.project(weights, list(cards), dict(fixed), list(keep))
    return _enum_py.project(weights, cards, fixed, keep)
