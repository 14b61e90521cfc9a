"""Edge active sets, the discrete BL criterion, optimal exponents and pair conditions.

For a kernel ``K`` and commuting maps ``T_1..T_m``, every edge ``x -> y``
(``x != y``, ``K(x, y) > 0``) activates the maps that separate its
endpoints.  Exponents ``c`` satisfy the BL condition iff every active
set carries total weight at most 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, NamedTuple, Sequence

import numpy as np

from .markov import FiniteMarkovModel, _as_float, format_fraction, to_fraction
from .quotient import FactorMap, NonCommutingMapError, check_commutation
from .simplex import maximize

__all__ = [
    "EdgeConstraintSystem",
    "Verdict",
    "PairVerdict",
    "ExponentCounts",
    "as_exponents",
    "edge_active_sets",
    "check_edge_criterion",
    "optimize_exponents",
    "bl_residuals",
    "check_bl_pointwise",
    "random_pointwise_check",
    "theta_ramp_family",
    "falsify_bl",
    "pair_condition_check",
    "exponent_formulas",
    "mask_to_set",
]


def mask_to_set(mask: int) -> tuple:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def as_exponents(c: Any, m: int | None = None, bounded: bool = True) -> tuple:
    """Exact exponent vector with entries in ``[0, 1]``; a scalar is broadcast to ``m`` maps.

    ``bounded=False`` only requires nonnegative entries.
    """
    if isinstance(c, (str, int, float, Fraction)) and not (isinstance(c, str) and "," in c):
        if m is None:
            raise ValueError("scalar exponent needs the number of maps")
        c = [c] * m
    elif isinstance(c, str):
        c = c.split(",")
    out = tuple(to_fraction(v) for v in c)
    if m is not None and len(out) != m:
        raise ValueError(f"exponent vector has {len(out)} entries, expected {m}")
    for v in out:
        if v < 0 or (bounded and v > 1):
            raise ValueError(f"exponent {v} outside [0, 1]" if bounded else f"coefficient {v} is negative")
    return out


@dataclass(frozen=True, eq=False)
class EdgeConstraintSystem:
    """All kernel edges with their active sets, plus the deduplicated sets.

    ``set_index[e]`` points into ``masks``; bit ``i`` of a mask is set when
    map ``i`` separates the endpoints of the edge.
    """

    sources: np.ndarray
    targets: np.ndarray
    set_index: np.ndarray
    masks: tuple
    m: int
    map_names: tuple = ()

    @property
    def n_edges(self) -> int:
        return len(self.sources)

    @property
    def active_sets(self) -> tuple:
        return tuple(mask_to_set(mk) for mk in self.masks)

    @property
    def nonempty_masks(self) -> tuple:
        return tuple(mk for mk in self.masks if mk)

    def edge_counts(self) -> np.ndarray:
        return np.bincount(self.set_index, minlength=len(self.masks))

    def edges(self):
        """Iterate ``(x, y, active_set)``."""
        sets = self.active_sets
        for x, y, s in zip(self.sources, self.targets, self.set_index):
            yield int(x), int(y), sets[s]

    def representative_edge(self, k: int) -> tuple:
        e = int(np.argmax(self.set_index == k))
        return int(self.sources[e]), int(self.targets[e])


def edge_active_sets(model: FiniteMarkovModel, maps: Sequence[FactorMap]) -> EdgeConstraintSystem:
    """Enumerate edges and their active sets.  Refuses maps that do not commute."""
    for tmap in maps:
        report = check_commutation(model, tmap)
        if not report.commutes:
            raise NonCommutingMapError(
                f"map {tmap.name!r} does not commute with the kernel (witness {report.witness})"
            )
    off = model.rows != model.indices
    src, dst = model.rows[off], model.indices[off]
    m = len(maps)
    if m == 0:
        separated = np.zeros((len(src), 0), dtype=bool)
    else:
        separated = np.stack([t.labels_array[src] != t.labels_array[dst] for t in maps], axis=1)
    if len(src) == 0:
        return EdgeConstraintSystem(src, dst, np.zeros(0, dtype=np.int64), (), m,
                                    tuple(t.name for t in maps))
    packed = np.packbits(separated, axis=1, bitorder="little")
    uniq, inv = np.unique(packed, axis=0, return_inverse=True)
    masks = tuple(int.from_bytes(row.tobytes(), "little") for row in uniq)
    return EdgeConstraintSystem(src, dst, inv.reshape(-1), masks, m, tuple(t.name for t in maps))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    max_sum: Fraction
    # first violated (or, on success, tightest) set and one edge carrying it
    witness_edge: tuple | None = None
    witness_set: tuple | None = None
    witness_sum: Fraction | None = None
    slacks: tuple = field(default=(), repr=False)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "max_sum": format_fraction(self.max_sum),
            "witness_edge": list(self.witness_edge) if self.witness_edge else None,
            "witness_set": list(self.witness_set) if self.witness_set is not None else None,
            "witness_sum": None if self.witness_sum is None else format_fraction(self.witness_sum),
            "active_sets": [
                {"set": list(s), "sum": format_fraction(total), "slack": format_fraction(1 - total),
                 "n_edges": n}
                for s, total, n in self.slacks
            ],
        }


def check_edge_criterion(system: EdgeConstraintSystem, c: Any) -> Verdict:
    """Exact test of ``sum_{i in I} c_i <= 1`` over every distinct active set."""
    c = as_exponents(c, system.m)
    counts = system.edge_counts() if system.masks else []
    slacks = []
    worst = None
    violated = None
    for k, mk in enumerate(system.masks):
        s = mask_to_set(mk)
        total = sum((c[i] for i in s), Fraction(0))
        slacks.append((s, total, int(counts[k])))
        if worst is None or total > worst[0]:
            worst = (total, k)
        if total > 1 and violated is None:
            violated = (total, k)
    if worst is None:
        return Verdict(True, Fraction(0), slacks=tuple(slacks))
    total, k = violated if violated is not None else worst
    return Verdict(
        passed=violated is None,
        max_sum=worst[0],
        witness_edge=system.representative_edge(k),
        witness_set=mask_to_set(system.masks[k]),
        witness_sum=total,
        slacks=tuple(slacks),
    )


def optimize_exponents(system: EdgeConstraintSystem, weights: Any = None) -> tuple:
    """Maximize ``sum w_i c_i`` over the BL polytope, exactly.

    Returns ``(c, objective)`` with ``c`` a tuple of fractions; the optimum
    is re-checked against the edge criterion before returning.
    """
    m = system.m
    w = [Fraction(1)] * m if weights is None else [to_fraction(v) for v in weights]
    if len(w) != m:
        raise ValueError(f"weights have {len(w)} entries, expected {m}")
    if any(v < 0 for v in w):
        raise ValueError("weights must be nonnegative")
    rows, rhs = [], []
    for mk in system.nonempty_masks:
        s = set(mask_to_set(mk))
        rows.append([1 if i in s else 0 for i in range(m)])
        rhs.append(1)
    for i in range(m):
        rows.append([1 if j == i else 0 for j in range(m)])
        rhs.append(1)
    res = maximize(rows, rhs, w)
    c = tuple(res.x)
    if not check_edge_criterion(system, c).passed:
        raise AssertionError("LP optimum violates the edge criterion")
    return c, res.objective


# ------------------------------------------------------- pointwise condition


def _block_functions_on_states(maps: Sequence[FactorMap], F_list: Sequence, on_states: bool):
    out = []
    for tmap, F in zip(maps, F_list):
        F = _as_float(F)
        if on_states:
            if F.shape[0] != len(tmap.labeling):
                raise ValueError(f"state function for {tmap.name!r} has wrong length")
            lab = tmap.labels_array
            ref = np.full(tmap.n_blocks, np.nan)
            ref[lab[::-1]] = F[::-1]
            if not np.array_equal(ref[lab], F):
                raise ValueError(f"F for map {tmap.name!r} is not constant on its blocks")
            out.append(F)
        else:
            if F.shape[0] != tmap.n_blocks:
                raise ValueError(
                    f"block function for {tmap.name!r} has {F.shape[0]} values, expected {tmap.n_blocks}"
                )
            out.append(F[tmap.labels_array])
    return out


def bl_residuals(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    F_list: Sequence,
    on_states: bool = False,
) -> np.ndarray:
    """Per-state ``e^{-H} L e^H - sum_i c_i e^{-F_i} L e^{F_i}`` with ``H = sum c_i F_i``.

    Written edge-wise with ``expm1`` so that no large exponentials are
    formed at the base point.
    """
    if len(F_list) != len(maps):
        raise ValueError("need one function per map")
    cf = np.array([float(v) for v in as_exponents(c, len(maps))])
    Fs = _block_functions_on_states(maps, F_list, on_states)
    r, y, w = model.rows, model.indices, model.weights
    n = model.n_states
    if not Fs:
        return np.zeros(n)
    diffs = np.stack([F[y] - F[r] for F in Fs], axis=0)
    lhs = np.bincount(r, weights=w * np.expm1(cf @ diffs), minlength=n)
    rhs = np.bincount(r, weights=w * (cf @ np.expm1(diffs)), minlength=n)
    return lhs - rhs


def check_bl_pointwise(model, maps, c, F_list, on_states: bool = False) -> float:
    """Max over states of the pointwise BL residual; nonpositive when the condition holds."""
    return float(np.max(bl_residuals(model, maps, c, F_list, on_states)))


def random_pointwise_check(model, maps, c, draws: int = 500, seed: int = 0, scale: float = 2.0) -> float:
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(draws):
        F = [rng.normal(scale=scale, size=t.n_blocks) for t in maps]
        worst = max(worst, check_bl_pointwise(model, maps, c, F))
    return worst


def theta_ramp_family(maps: Sequence[FactorMap], model: FiniteMarkovModel, x: int, theta: float) -> list:
    """Block functions ``theta * 1[b != T_i(x)]`` used to detect a violated edge at ``x``."""
    out = []
    for tmap in maps:
        F = np.full(tmap.n_blocks, float(theta))
        F[tmap.labeling[x]] = 0.0
        out.append(F)
    return out


class FalsifierResult(NamedTuple):
    """Best ramp residual found; the true residual is ``residual * exp(log_scale)``."""

    residual: float
    state: int | None
    edge: tuple | None
    active_set: tuple | None
    theta: float | None = None
    log_scale: float = 0.0


def _ramp_residual(model: FiniteMarkovModel, maps, cf: np.ndarray, x: int, theta: float) -> tuple:
    """Residual at ``x`` of the theta ramp, as ``(value, log_scale)``.

    Every edge out of ``x`` moves a set ``A`` of maps and contributes
    ``w (expm1(theta c_A) - c_A expm1(theta))``.  Terms are scaled by
    ``exp(-M)``, ``M = theta max(1, max c_A)``, so large ``theta`` cannot overflow.
    """
    lo, hi = model.indptr[x], model.indptr[x + 1]
    ys, w = model.indices[lo:hi], model.weights[lo:hi]
    moved = np.stack([t.labels_array[ys] != t.labels_array[x] for t in maps], axis=0).astype(float)
    sums = cf @ moved
    M = theta * max(1.0, float(sums.max(initial=0.0)))
    scaled = np.exp(theta * sums - M) - math.exp(-M) - sums * (math.exp(theta - M) - math.exp(-M))
    value = float(w @ scaled)
    if M <= 700.0:
        return value * math.exp(M), 0.0
    return value, M


def falsify_bl(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    system: EdgeConstraintSystem | None = None,
    theta: float = 20.0,
    theta_max: float = 1e8,
) -> FalsifierResult:
    """Try the ramp functions at the source of every violating edge.

    For each violating active set, ``theta`` is doubled until the residual
    at the edge source turns positive (it must, once ``theta (sum - 1)`` is
    large) or ``theta_max`` is reached.  Returns the first positive
    residual, or the largest one seen.
    """
    if system is None:
        system = edge_active_sets(model, maps)
    cq = as_exponents(c, system.m)
    cf = np.array([float(v) for v in cq])
    best = FalsifierResult(-math.inf, None, None, None)
    for k, mk in enumerate(system.masks):
        s = mask_to_set(mk)
        if sum((cq[i] for i in s), Fraction(0)) <= 1:
            continue
        x, y = system.representative_edge(k)
        th = float(theta)
        while True:
            res, scale = _ramp_residual(model, maps, cf, x, th)
            if res > 0:
                return FalsifierResult(res, x, (x, y), s, th, scale)
            if scale == 0.0 and res > best.residual:
                best = FalsifierResult(res, x, (x, y), s, th, scale)
            if th >= theta_max:
                break
            th *= 2.0
    return best


# ----------------------------------------------------------- pair conditions


class PairVerdict(NamedTuple):
    passed: bool
    max_sum: Fraction
    worst_pair: tuple | None


def pair_condition_check(family: Sequence, n: int | None = None) -> PairVerdict:
    """Pair test for families of coordinate subsets with exponents.

    ``family`` holds ``(I, kind, c_I)`` with ``I`` a nonempty subset of
    ``{1..n}`` and ``kind`` either ``"restriction"`` (counted when ``I``
    meets the pair) or ``"image"`` (counted when ``I`` holds exactly one
    point of the pair).  Passes iff every pair ``i != j`` totals at most 1.
    """
    items = []
    for I, kind, c in family:
        I = frozenset(int(i) for i in I)
        if not I:
            raise ValueError("empty index set")
        if kind not in ("restriction", "image"):
            raise ValueError(f"unknown kind {kind!r}")
        cq = to_fraction(c)
        if cq < 0:
            raise ValueError("coefficients must be nonnegative")
        items.append((I, kind, cq))
    if n is None:
        n = max((max(I) for I, _, _ in items), default=0)
    if any(min(I) < 1 or max(I) > n for I, _, _ in items):
        raise ValueError(f"index sets must lie in 1..{n}")
    worst, worst_pair = Fraction(0), None
    for i, j in combinations(range(1, n + 1), 2):
        total = Fraction(0)
        for I, kind, cq in items:
            hits = (i in I) + (j in I)
            if (kind == "restriction" and hits >= 1) or (kind == "image" and hits == 1):
                total += cq
        if worst_pair is None or total > worst:
            worst, worst_pair = total, (i, j)
    return PairVerdict(worst <= 1, worst, worst_pair)


class ExponentCounts(NamedTuple):
    p: int
    q: int
    naive: int


def exponent_formulas(n: int, k: int) -> ExponentCounts:
    """Exponents for the family of all ``k``-subsets of ``{1..n}``.

    ``p`` counts subsets meeting a pair, ``q`` those holding exactly one of
    its points; ``naive = 2 C(n-1, k-1)`` is what the plain lift from the
    Euclidean decomposition of the identity gives.
    """
    if n < 2 or not 1 <= k <= n - 1:
        raise ValueError(f"need n >= 2 and 1 <= k <= n-1, got n={n}, k={k}")
    p = math.comb(n, k) - math.comb(n - 2, k)
    q = 2 * math.comb(n - 2, k - 1)
    return ExponentCounts(p, q, 2 * math.comb(n - 1, k - 1))
