"""Pure-Python enumeration kernel (unbounded integers)."""

from __future__ import annotations

from itertools import product
from math import prod
from typing import Mapping, Sequence


def _strides(cards: Sequence[int]) -> list[int]:
    out = [1] * len(cards)
    for k in range(len(cards) - 2, -1, -1):
        out[k] = out[k + 1] * cards[k + 1]
    return out


def joint_weights(cards: Sequence[int], factors: Sequence[tuple[Sequence[int], Sequence[int]]]) -> list[int]:
    """Weight of every full assignment, last variable varying fastest.

    Each factor is ``(scope, table)`` with ``table`` a flat list of integer
    numerators indexed in mixed radix over ``scope`` (last varies fastest).
    """
    prepared = []
    for scope, table in factors:
        st = _strides([cards[v] for v in scope])
        prepared.append((tuple(zip(scope, st)), table))
    out = []
    append = out.append
    for digits in product(*(range(c) for c in cards)):
        w = 1
        for pairs, table in prepared:
            w *= table[sum(digits[v] * s for v, s in pairs)]
            if not w:
                break
        append(w)
    return out


def project(weights: Sequence[int], cards: Sequence[int], fixed: Mapping[int, int], keep: Sequence[int]) -> list[int]:
    """Sum weights of assignments matching ``fixed``, grouped by ``keep`` values."""
    full = _strides(cards)
    kst = _strides([cards[v] for v in keep])
    base = sum(full[v] * x for v, x in fixed.items())
    free = [v for v in range(len(cards)) if v not in fixed]
    kpos = {v: s for v, s in zip(keep, kst)}
    kfixed = sum(kpos[v] * x for v, x in fixed.items() if v in kpos)
    out = [0] * prod(cards[v] for v in keep)
    fs = [full[v] for v in free]
    ks = [kpos.get(v, 0) for v in free]
    for digits in product(*(range(cards[v]) for v in free)):
        w = weights[base + sum(d * s for d, s in zip(digits, fs))]
        if w:
            out[kfixed + sum(d * s for d, s in zip(digits, ks))] += w
    return out
