"""Finite Markov models: kernels, invariant measures, semigroups, Dirichlet forms.

Kernels are stored in CSR layout with exact integer numerators over a
common denominator, so the structural checks (stochasticity, stationarity,
reversibility, lumpability) are exact while the float views used by the
semigroup are derived once and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import gammainc, gammaln

__all__ = [
    "ModelError",
    "NotStochasticError",
    "InvariantMeasureError",
    "FiniteMarkovModel",
    "to_fraction",
    "format_fraction",
    "build_model",
    "semigroup_apply",
    "uniformization_terms",
    "generator_apply",
    "carre_du_champ",
    "dirichlet_form",
    "generator_form",
]

# float64 represents every integer below this exactly
_EXACT_FLOAT_INT = 2**52
_TAIL_TOL = 1e-14


class ModelError(ValueError):
    pass


class NotStochasticError(ModelError):
    pass


class InvariantMeasureError(ModelError):
    pass


def to_fraction(value: Any) -> Fraction:
    """Parse ``int``, ``Fraction``, ``"p/q"`` strings or decimal floats exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError(f"not a number: {value!r}")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        # decimal reading: 0.1 -> 1/10, not the binary expansion
        return Fraction(repr(float(value)))
    raise TypeError(f"cannot convert {value!r} to a rational")


def format_fraction(q: Fraction) -> str | int:
    q = Fraction(q)
    if q.denominator == 1:
        return q.numerator
    return f"{q.numerator}/{q.denominator}"


def _common_denominator(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, v.denominator)
    return d


@dataclass(frozen=True, eq=False)
class FiniteMarkovModel:
    """Row-stochastic kernel on ``n_states`` labelled states with invariant measure.

    ``K(x, y) = numerators[k] / denominator`` for ``k`` in
    ``indptr[x]:indptr[x+1]`` with ``indices[k] == y``; only nonzero
    entries are stored.  ``mu(x) = mu_numerators[x] / mu_denominator``.
    Use :func:`build_model` rather than the constructor.
    """

    labels: tuple
    indptr: np.ndarray
    indices: np.ndarray
    numerators: tuple
    denominator: int
    mu_numerators: tuple
    mu_denominator: int
    reversible: bool

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def nnz(self) -> int:
        return len(self.numerators)

    @cached_property
    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    @cached_property
    def mu(self) -> tuple:
        return tuple(Fraction(a, self.mu_denominator) for a in self.mu_numerators)

    @cached_property
    def mu_float(self) -> np.ndarray:
        return np.array([a / self.mu_denominator for a in self.mu_numerators])

    @cached_property
    def rows(self) -> np.ndarray:
        """Source state of every stored entry (CSR row expansion)."""
        return np.repeat(np.arange(self.n_states), np.diff(self.indptr))

    @cached_property
    def numerators_float(self) -> np.ndarray:
        return np.array(self.numerators, dtype=float)

    @cached_property
    def weights(self) -> np.ndarray:
        d = self.denominator
        return np.array([a / d for a in self.numerators], dtype=float)

    @cached_property
    def K(self) -> sp.csr_matrix:
        n = self.n_states
        return sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(n, n))

    @cached_property
    def irreducible(self) -> bool:
        n_comp, _ = connected_components(self.K, directed=True, connection="strong")
        return n_comp == 1

    def row(self, x: int) -> list:
        """``[(y, K(x, y)), ...]`` for the nonzero entries of row ``x``."""
        lo, hi = self.indptr[x], self.indptr[x + 1]
        d = self.denominator
        return [(int(self.indices[k]), Fraction(self.numerators[k], d)) for k in range(lo, hi)]

    def kernel_entry(self, x: int, y: int) -> Fraction:
        lo, hi = self.indptr[x], self.indptr[x + 1]
        pos = lo + np.searchsorted(self.indices[lo:hi], y)
        if pos < hi and self.indices[pos] == y:
            return Fraction(self.numerators[pos], self.denominator)
        return Fraction(0)

    @property
    def kernel(self) -> list:
        """Dense exact kernel; intended for small models."""
        n = self.n_states
        out = [[Fraction(0)] * n for _ in range(n)]
        for x in range(n):
            for y, v in self.row(x):
                out[x][y] = v
        return out

    def __repr__(self) -> str:
        return (
            f"FiniteMarkovModel(n_states={self.n_states}, nnz={self.nnz}, "
            f"reversible={self.reversible})"
        )


def _parse_rows(kernel: Any, n: int) -> list[dict]:
    if len(kernel) != n:
        raise ModelError(f"kernel has {len(kernel)} rows, expected {n}")
    rows = []
    for x, row in enumerate(kernel):
        if isinstance(row, Mapping):
            entries = {}
            for y, v in row.items():
                y = int(y)
                if not 0 <= y < n:
                    raise ModelError(f"row {x}: column {y} out of range")
                v = to_fraction(v)
                entries[y] = entries[y] + v if y in entries else v
        else:
            if len(row) != n:
                raise ModelError(f"kernel is not square: row {x} has length {len(row)}")
            entries = {y: to_fraction(v) for y, v in enumerate(row)}
        for y, v in entries.items():
            if v < 0:
                raise NotStochasticError(f"negative entry K({x}, {y}) = {v}")
        rows.append({y: v for y, v in sorted(entries.items()) if v != 0})
    return rows


def _solve_invariant(rows: list[dict]) -> list[Fraction]:
    """Exact solution of mu K = mu, sum(mu) = 1; raises if not unique."""
    n = len(rows)
    # equation y: sum_x mu_x (K(x,y) - [x == y]) = 0, stored sparse by unknown
    eqs: list[dict] = [dict() for _ in range(n)]
    for x, row in enumerate(rows):
        for y, v in row.items():
            eqs[y][x] = eqs[y].get(x, 0) + v
        eqs[x][x] = eqs[x].get(x, 0) - 1
    eqs = [{k: v for k, v in e.items() if v != 0} for e in eqs]
    system = [(e, Fraction(0)) for e in eqs]
    system.append(({x: Fraction(1) for x in range(n)}, Fraction(1)))

    pivots: dict[int, tuple[dict, Fraction]] = {}
    for eq, rhs in system:
        eq = dict(eq)
        # reduce against existing pivots until stable
        changed = True
        while changed and eq:
            changed = False
            for var in list(eq):
                if var in pivots and var in eq:
                    prow, prhs = pivots[var]
                    factor = eq[var]
                    for k, v in prow.items():
                        nv = eq.get(k, 0) - factor * v
                        if nv == 0:
                            eq.pop(k, None)
                        else:
                            eq[k] = nv
                    rhs -= factor * prhs
                    changed = True
        if not eq:
            if rhs != 0:
                raise InvariantMeasureError("inconsistent stationarity system")
            continue
        var = min(eq)
        piv = eq[var]
        eq = {k: v / piv for k, v in eq.items()}
        rhs = rhs / piv
        # keep pivots fully reduced so back-substitution is trivial
        for other, (orow, orhs) in list(pivots.items()):
            if var in orow:
                f = orow[var]
                nrow = dict(orow)
                for k, v in eq.items():
                    nv = nrow.get(k, 0) - f * v
                    if nv == 0:
                        nrow.pop(k, None)
                    else:
                        nrow[k] = nv
                pivots[other] = (nrow, orhs - f * rhs)
        pivots[var] = (eq, rhs)
    if len(pivots) < n:
        raise InvariantMeasureError(
            f"invariant measure not unique (stationarity rank {len(pivots) - 1} < {n - 1}); "
            "kernel is reducible"
        )
    mu = [Fraction(0)] * n
    for var, (row, rhs) in pivots.items():
        assert set(row) == {var}
        mu[var] = rhs
    if any(v < 0 for v in mu):
        raise InvariantMeasureError("stationarity solution has negative mass")
    return mu


def _check_stationary(indptr, indices, nums, d, mu_nums, mu_d) -> bool:
    n = len(mu_nums)
    max_a = max(mu_nums, default=0)
    max_k = max(nums, default=0)
    if max_a * max_k * n < 2**62:
        m = sp.csr_matrix(
            (np.array(nums, dtype=np.int64), indices, indptr), shape=(n, n)
        )
        lhs = m.T @ np.array(mu_nums, dtype=np.int64)
        return bool(np.array_equal(lhs, np.array(mu_nums, dtype=np.int64) * d))
    acc = [0] * n
    for x in range(n):
        a = mu_nums[x]
        if a:
            for k in range(indptr[x], indptr[x + 1]):
                acc[indices[k]] += a * nums[k]
    return all(acc[y] == mu_nums[y] * d for y in range(n))


def _check_reversible(indptr, indices, nums, mu_nums) -> bool:
    n = len(mu_nums)
    if max(mu_nums, default=0) * max(nums, default=0) < 2**62:
        flux = sp.csr_matrix(
            (np.repeat(np.array(mu_nums, dtype=np.int64), np.diff(indptr))
             * np.array(nums, dtype=np.int64), indices, indptr),
            shape=(n, n),
        )
        return (flux != flux.T).nnz == 0
    entries = {}
    for x in range(n):
        for k in range(indptr[x], indptr[x + 1]):
            entries[(x, int(indices[k]))] = mu_nums[x] * nums[k]
    return all(entries.get((y, x), 0) == v for (x, y), v in entries.items())


def build_model(labels: Sequence, kernel: Any, mu: Sequence | None = None) -> FiniteMarkovModel:
    """Validate a kernel (dense rows or ``{column: value}`` rows) and build a model.

    Raises
    ------
    NotStochasticError
        A row has a negative entry or does not sum to exactly 1.
    InvariantMeasureError
        ``mu`` is given but is not a stationary probability, or ``mu`` is
        omitted and the stationary distribution is not unique.
    """
    labels = tuple(tuple(l) if isinstance(l, list) else l for l in labels)
    n = len(labels)
    if n == 0:
        raise ModelError("empty state space")
    if len(set(labels)) != n:
        raise ModelError("state labels are not distinct")
    rows = _parse_rows(kernel, n)
    d = _common_denominator({v.denominator: v for row in rows for v in row.values()}.values())
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices: list[int] = []
    nums: list[int] = []
    for x, row in enumerate(rows):
        start = len(nums)
        for y, v in row.items():
            indices.append(y)
            nums.append(v.numerator * (d // v.denominator))
        total = sum(nums[start:])
        if total != d:
            raise NotStochasticError(f"row {x} sums to {Fraction(total, d)}, not 1")
        indptr[x + 1] = len(indices)
    indices_arr = np.array(indices, dtype=np.int64)

    if mu is None:
        mu_q = _solve_invariant(rows)
    else:
        if len(mu) != n:
            raise InvariantMeasureError(f"mu has length {len(mu)}, expected {n}")
        mu_q = [to_fraction(v) for v in mu]
        if any(v < 0 for v in mu_q):
            raise InvariantMeasureError("mu has a negative entry")
        if sum(mu_q, Fraction(0)) != 1:
            raise InvariantMeasureError("mu does not sum to 1")
    mu_d = _common_denominator(mu_q)
    mu_nums = [v.numerator * (mu_d // v.denominator) for v in mu_q]
    if mu is not None and not _check_stationary(indptr, indices_arr, nums, d, mu_nums, mu_d):
        raise InvariantMeasureError("mu is not invariant: mu K != mu")
    reversible = _check_reversible(indptr, indices_arr, nums, mu_nums)
    return FiniteMarkovModel(
        labels=labels,
        indptr=indptr,
        indices=indices_arr,
        numerators=tuple(nums),
        denominator=d,
        mu_numerators=tuple(mu_nums),
        mu_denominator=mu_d,
        reversible=reversible,
    )


# ---------------------------------------------------------------- semigroup


def uniformization_terms(t: float, tol: float = _TAIL_TOL) -> int:
    """Smallest ``N`` with Poisson(t) tail ``P(X > N) < tol``."""
    if t == 0:
        return 0
    lo, hi = 0, max(16, int(t + 10 * math.sqrt(t) + 40))
    while gammainc(hi + 1, t) >= tol:
        hi *= 2
    # gammainc(N + 1, t) = P(Poisson(t) > N), decreasing in N
    while lo < hi:
        mid = (lo + hi) // 2
        if gammainc(mid + 1, t) < tol:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _as_float(f: Any) -> np.ndarray:
    arr = np.asarray(f)
    if arr.dtype == object:
        arr = np.vectorize(float, otypes=[float])(arr)
    return np.asarray(arr, dtype=float)


def semigroup_apply(model: FiniteMarkovModel, t: float, f: Any) -> np.ndarray:
    """``P_t f = exp(t (K - I)) f`` by uniformization.

    ``f`` may be a vector or an ``(n_states, k)`` array of column vectors.
    The series is cut where the Poisson tail drops below ``1e-14``; since
    ``K`` is a contraction in sup norm the truncation error is at most
    ``1e-14 * max|f|``.
    """
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    v = _as_float(f)
    if v.shape[0] != model.n_states:
        raise ValueError(f"function has {v.shape[0]} entries, model has {model.n_states} states")
    if t == 0:
        return v.copy()
    n_terms = uniformization_terms(t)
    K = model.K
    log_t = math.log(t)
    out = math.exp(-t) * v
    for k in range(1, n_terms + 1):
        v = K @ v
        w = math.exp(-t + k * log_t - gammaln(k + 1))
        out = out + w * v
    return out


def generator_apply(model: FiniteMarkovModel, f: Any) -> np.ndarray:
    """``L f = K f - f`` in floats."""
    v = _as_float(f)
    return model.K @ v - v


# ---------------------------------------------------- carré du champ / forms


def _is_exact(*arrays: Any) -> bool:
    return any(isinstance(v, Fraction) for a in arrays for v in np.ravel(np.asarray(a, dtype=object)))


def _check_length(model: FiniteMarkovModel, *arrays: Any) -> None:
    for a in arrays:
        if len(a) != model.n_states:
            raise ValueError(
                f"function of length {len(a)} does not live on a model with {model.n_states} states"
            )


def carre_du_champ(model: FiniteMarkovModel, f: Any, g: Any) -> Any:
    """``Gamma(f, g)(x) = 1/2 sum_y K(x,y) (f(y)-f(x)) (g(y)-g(x))``.

    Rational inputs (any ``Fraction`` entry) give an exact list of
    fractions; otherwise a float array.
    """
    _check_length(model, f, g)
    if _is_exact(f, g):
        fq = [to_fraction(v) for v in f]
        gq = [to_fraction(v) for v in g]
        out = []
        half = Fraction(1, 2 * model.denominator)
        for x in range(model.n_states):
            acc = 0
            for k in range(model.indptr[x], model.indptr[x + 1]):
                y = model.indices[k]
                acc += model.numerators[k] * (fq[y] - fq[x]) * (gq[y] - gq[x])
            out.append(acc * half)
        return out
    fv, gv = _as_float(f), _as_float(g)
    r, c = model.rows, model.indices
    terms = model.weights * (fv[c] - fv[r]) * (gv[c] - gv[r])
    return 0.5 * np.bincount(r, weights=terms, minlength=model.n_states)


def dirichlet_form(model: FiniteMarkovModel, f: Any, g: Any) -> Any:
    """``E(f, g) = sum_x mu(x) Gamma(f, g)(x)``; exact for rational input."""
    gamma = carre_du_champ(model, f, g)
    if isinstance(gamma, list):
        return sum((m * v for m, v in zip(model.mu, gamma)), Fraction(0))
    return float(model.mu_float @ gamma)


def generator_form(model: FiniteMarkovModel, f: Any, g: Any) -> Any:
    """``-sum_x mu(x) f(x) (L g)(x)``; equals the Dirichlet form for reversible models."""
    _check_length(model, f, g)
    if _is_exact(f, g):
        fq = [to_fraction(v) for v in f]
        gq = [to_fraction(v) for v in g]
        total = Fraction(0)
        for x in range(model.n_states):
            lg = sum((w * (gq[y] - gq[x]) for y, w in model.row(x)), Fraction(0))
            total -= model.mu[x] * fq[x] * lg
        return total
    return float(-(model.mu_float * _as_float(f)) @ generator_apply(model, g))
