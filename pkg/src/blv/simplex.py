"""Dense exact-rational simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The origin is feasible, so a single phase suffices.  Bland's rule
(smallest eligible index for both entering and leaving variables)
rules out cycling.
"""

from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple, Sequence

__all__ = ["LPResult", "UnboundedError", "maximize"]


class UnboundedError(ValueError):
    pass


class LPResult(NamedTuple):
    x: list
    objective: Fraction
    pivots: int


def maximize(A: Sequence[Sequence], b: Sequence, c: Sequence, max_pivots: int = 100_000) -> LPResult:
    m, n = len(A), len(c)
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    c = [Fraction(v) for v in c]
    if any(len(row) != n for row in A):
        raise ValueError("constraint matrix has inconsistent width")
    if any(v < 0 for v in b):
        raise ValueError("right-hand side must be nonnegative (origin must be feasible)")

    # tableau over n structural + m slack variables
    width = n + m
    T = [A[i] + [Fraction(int(i == j)) for j in range(m)] + [b[i]] for i in range(m)]
    # reduced costs: z_j - c_j convention, entering when negative
    obj = [-v for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]

    pivots = 0
    while True:
        entering = next((j for j in range(width) if obj[j] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            a = T[i][entering]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise UnboundedError("objective is unbounded")
        r = best[1]
        piv = T[r][entering]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][entering] != 0:
                f = T[i][entering]
                T[i] = [vi - f * vr for vi, vr in zip(T[i], T[r])]
        f = obj[entering]
        obj = [vo - f * vr for vo, vr in zip(obj, T[r])]
        basis[r] = entering
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("pivot limit exceeded")

    x = [Fraction(0)] * n
    for i, var in enumerate(basis):
        if var < n:
            x[var] = T[i][-1]
    objective = sum((ci * xi for ci, xi in zip(c, x)), Fraction(0))
    return LPResult(x, objective, pivots)
