"""Factor maps, the lumpability test, quotient kernels and conditional densities."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Hashable, Sequence

import numpy as np

from .markov import FiniteMarkovModel, _as_float, _is_exact, build_model, to_fraction

__all__ = [
    "FactorMap",
    "NonCommutingMapError",
    "CommutationReport",
    "factor_map",
    "map_from_labeling",
    "check_commutation",
    "quotient_model",
    "conditional_density",
    "lift",
]


class NonCommutingMapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FactorMap:
    """A surjective labelling ``T: states -> {0, ..., n_blocks - 1}``.

    ``block_measure`` is the pushforward of the model's invariant measure
    and every block carries positive mass.  ``block_labels`` keeps the
    human-readable value of ``T`` on each block.
    """

    name: str
    labeling: tuple
    n_blocks: int
    block_measure: tuple
    block_labels: tuple

    @cached_property
    def labels_array(self) -> np.ndarray:
        return np.asarray(self.labeling, dtype=np.int64)

    @cached_property
    def block_measure_float(self) -> np.ndarray:
        return np.array([float(m) for m in self.block_measure])

    @cached_property
    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels_array, minlength=self.n_blocks)

    def __repr__(self) -> str:
        return f"FactorMap({self.name!r}, n_blocks={self.n_blocks})"


def _pushforward(model: FiniteMarkovModel, labeling: Sequence[int], n_blocks: int) -> tuple:
    acc = [0] * n_blocks
    for x, b in enumerate(labeling):
        acc[b] += model.mu_numerators[x]
    return tuple(Fraction(a, model.mu_denominator) for a in acc)


def map_from_labeling(
    model: FiniteMarkovModel,
    labeling: Sequence[int],
    name: str = "T",
    block_labels: Sequence | None = None,
) -> FactorMap:
    """Factor map from explicit block indices ``0..m-1`` (must be surjective)."""
    labeling = tuple(int(b) for b in labeling)
    if len(labeling) != model.n_states:
        raise ValueError(
            f"labeling has {len(labeling)} entries, model has {model.n_states} states"
        )
    if not labeling:
        raise ValueError("empty labeling")
    n_blocks = max(labeling) + 1
    if min(labeling) < 0 or len(set(labeling)) != n_blocks:
        raise ValueError("labeling must be surjective onto 0..n_blocks-1")
    measure = _pushforward(model, labeling, n_blocks)
    empty = [b for b, m in enumerate(measure) if m == 0]
    if empty:
        raise ValueError(f"blocks {empty} of map {name!r} carry zero mass")
    if block_labels is None:
        block_labels = tuple(range(n_blocks))
    return FactorMap(name, labeling, n_blocks, measure, tuple(block_labels))


def factor_map(model: FiniteMarkovModel, keys: Sequence[Hashable], name: str = "T") -> FactorMap:
    """Factor map whose blocks are the distinct values of ``keys`` (sorted when possible)."""
    distinct = list(dict.fromkeys(keys))
    try:
        distinct.sort()
    except TypeError:
        pass
    pos = {k: i for i, k in enumerate(distinct)}
    return map_from_labeling(model, [pos[k] for k in keys], name, block_labels=distinct)


def lift(tmap: FactorMap, block_values: Any) -> np.ndarray:
    """``g o T`` as a state function, for a block function ``g``."""
    g = np.asarray(block_values)
    if g.shape[0] != tmap.n_blocks:
        raise ValueError(f"block function has {g.shape[0]} values, map has {tmap.n_blocks} blocks")
    return g[tmap.labels_array]


@dataclass(frozen=True)
class CommutationReport:
    commutes: bool
    map_name: str
    # (x, y, b): x and y share a block yet send different mass into block b
    witness: tuple | None = None
    mass_x: Fraction | None = None
    mass_y: Fraction | None = None


def _block_sums(model: FiniteMarkovModel, tmap: FactorMap) -> list[dict]:
    """Exact integer row sums ``sum_{z in b} K(x, z) * denominator`` per state."""
    lab = tmap.labeling
    out = []
    for x in range(model.n_states):
        acc: dict = {}
        for k in range(model.indptr[x], model.indptr[x + 1]):
            b = lab[model.indices[k]]
            acc[b] = acc.get(b, 0) + model.numerators[k]
        out.append(acc)
    return out


def check_commutation(model: FiniteMarkovModel, tmap: FactorMap) -> CommutationReport:
    """Decide exactly whether ``K(g o T)`` factors through ``T`` for every ``g``.

    Equivalent to: states in the same block send equal mass into every
    block.  Taking ``g`` an indicator of a block shows necessity.
    """
    if len(tmap.labeling) != model.n_states:
        raise ValueError("factor map is defined on a different state space")
    if model.denominator < 2**52:
        return _check_commutation_vectorized(model, tmap)
    sums = _block_sums(model, tmap)
    rep: dict = {}
    for x, b in enumerate(tmap.labeling):
        if b not in rep:
            rep[b] = x
            continue
        r = rep[b]
        if sums[x] != sums[r]:
            target = next(
                bb for bb in sorted(set(sums[x]) | set(sums[r])) if sums[x].get(bb) != sums[r].get(bb)
            )
            d = model.denominator
            return CommutationReport(
                False, tmap.name, (r, x, target),
                Fraction(sums[r].get(target, 0), d), Fraction(sums[x].get(target, 0), d),
            )
    return CommutationReport(True, tmap.name)


def _check_commutation_vectorized(model: FiniteMarkovModel, tmap: FactorMap) -> CommutationReport:
    lab = tmap.labels_array
    m = tmap.n_blocks
    rows, cols = model.rows, model.indices
    key = rows * m + lab[cols]
    uniq, inv = np.unique(key, return_inverse=True)
    # integer sums below 2**52 are exact in float64
    sums = np.bincount(inv, weights=model.numerators_float)
    xs, bs = uniq // m, uniq % m
    ax = lab[xs]
    isums = sums.astype(np.int64)
    # group identical (block of x, target block, mass) triples; in a lumpable
    # kernel every triple occurs once per member of the source block
    order = np.lexsort((isums, bs, ax))
    ta, tb, ts = ax[order], bs[order], isums[order]
    starts = np.flatnonzero(
        np.r_[True, (ta[1:] != ta[:-1]) | (tb[1:] != tb[:-1]) | (ts[1:] != ts[:-1])]
    )
    counts = np.diff(np.r_[starts, len(order)])
    bad = counts != tmap.block_sizes[ta[starts]]
    if not bad.any():
        return CommutationReport(True, tmap.name)
    first = starts[np.argmax(bad)]
    a, b, s = int(ta[first]), int(tb[first]), int(ts[first])
    members = np.flatnonzero(lab == a)
    has = set(xs[(ax == a) & (bs == b) & (isums == s)].tolist())
    x = next(int(z) for z in members if z in has)
    y = next(int(z) for z in members if z not in has)
    sums_b = _block_sums(model, tmap)
    d = model.denominator
    return CommutationReport(
        False, tmap.name, (x, y, b),
        Fraction(sums_b[x].get(b, 0), d), Fraction(sums_b[y].get(b, 0), d),
    )


def quotient_model(model: FiniteMarkovModel, tmap: FactorMap) -> FiniteMarkovModel:
    """Lumped chain ``K_T(b, b') = sum_{z in b'} K(x, z)`` for any ``x`` in ``b``."""
    report = check_commutation(model, tmap)
    if not report.commutes:
        raise NonCommutingMapError(
            f"map {tmap.name!r} does not commute with the kernel (witness {report.witness})"
        )
    reps = {}
    for x, b in enumerate(tmap.labeling):
        reps.setdefault(b, x)
    d = model.denominator
    lab = tmap.labeling
    rows = []
    for b in range(tmap.n_blocks):
        x = reps[b]
        acc: dict = {}
        for k in range(model.indptr[x], model.indptr[x + 1]):
            bb = lab[model.indices[k]]
            acc[bb] = acc.get(bb, 0) + model.numerators[k]
        rows.append({bb: Fraction(v, d) for bb, v in acc.items()})
    labels = tmap.block_labels
    if len(set(labels)) != len(labels):
        labels = tuple(range(tmap.n_blocks))
    return build_model(labels, rows, tmap.block_measure)


def conditional_density(
    model: FiniteMarkovModel, tmap: FactorMap, f: Any, tol: float = 1e-12
) -> Any:
    """Conditional expectation of a density ``f`` given ``T`` (block averages under mu).

    Exact for rational input.  Raises ``ValueError`` if ``f`` is negative
    somewhere or does not integrate to 1.
    """
    if len(f) != model.n_states:
        raise ValueError("density does not live on this model")
    if _is_exact(f):
        fq = [to_fraction(v) for v in f]
        if any(v < 0 for v in fq):
            raise ValueError("density has a negative value")
        if sum((m * v for m, v in zip(model.mu, fq)), Fraction(0)) != 1:
            raise ValueError("f is not a probability density: mu-mean != 1")
        acc = [Fraction(0)] * tmap.n_blocks
        for x, b in enumerate(tmap.labeling):
            acc[b] += model.mu[x] * fq[x]
        avg = [a / m for a, m in zip(acc, tmap.block_measure)]
        return [avg[b] for b in tmap.labeling]
    fv = _as_float(f)
    if np.any(fv < 0):
        raise ValueError("density has a negative value")
    mean = float(model.mu_float @ fv)
    if abs(mean - 1.0) > tol:
        raise ValueError(f"f is not a probability density: mu-mean = {mean!r}")
    lab = tmap.labels_array
    mass = np.bincount(lab, weights=model.mu_float * fv, minlength=tmap.n_blocks)
    return (mass / tmap.block_measure_float)[lab]
