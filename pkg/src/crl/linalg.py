"""Sparse Gauss-Jordan elimination over the rationals."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence


class SingularSystem(ValueError):
    pass


def solve(rows: Sequence[Mapping[int, Fraction]], rhs: Sequence[Fraction]) -> list[Fraction]:
    """Solve ``A x = b`` exactly; ``rows[i]`` maps column -> coefficient."""
    n = len(rows)
    A = [dict((j, Fraction(c)) for j, c in r.items() if c) for r in rows]
    b = [Fraction(x) for x in rhs]
    pivot_row: dict[int, int] = {}
    for col in range(n):
        pick = None
        for i in range(n):
            if i not in pivot_row.values() and A[i].get(col):
                if pick is None or len(A[i]) < len(A[pick]):
                    pick = i
        if pick is None:
            raise SingularSystem(f"no pivot for column {col}")
        pivot_row[col] = pick
        inv = 1 / A[pick][col]
        A[pick] = {j: c * inv for j, c in A[pick].items()}
        b[pick] *= inv
        prow = A[pick]
        for i in range(n):
            if i != pick:
                f = A[i].get(col)
                if f:
                    row = A[i]
                    for j, c in prow.items():
                        v = row.get(j, 0) - f * c
                        if v:
                            row[j] = v
                        else:
                            row.pop(j, None)
                    b[i] -= f * b[pick]
    return [b[pivot_row[col]] for col in range(n)]
