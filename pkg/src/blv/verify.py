"""Brute-force and adversarial checks of the local and global correlation inequalities.

A *family* is a list of nonnegative block functions, one per factor map
(``family[i]`` has ``maps[i].n_blocks`` entries).  Conventions:
``0 ** c = 0`` for ``c > 0`` and ``f ** 0 = 1``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import logsumexp

from .bl import as_exponents, check_edge_criterion, edge_active_sets
from .markov import FiniteMarkovModel, semigroup_apply
from .quotient import FactorMap, quotient_model

__all__ = [
    "global_sides",
    "global_gap",
    "local_sides",
    "local_gap",
    "interpolation_profile",
    "is_nonincreasing",
    "lognormal_family",
    "indicator_families",
    "adversarial_search",
    "TrialReport",
    "random_trial_suite",
    "max_threads",
]


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("BLV_THREADS", "1")))
    except ValueError:
        return 1


def _exponents(c: Any, maps: Sequence[FactorMap]) -> np.ndarray:
    return np.array([float(v) for v in as_exponents(c, len(maps))])


def _check_family(maps: Sequence[FactorMap], family: Sequence) -> list:
    if len(family) != len(maps):
        raise ValueError(f"family has {len(family)} functions for {len(maps)} maps")
    out = []
    for tmap, f in zip(maps, family):
        f = np.asarray(f, dtype=float)
        if f.shape != (tmap.n_blocks,):
            raise ValueError(f"function for {tmap.name!r} must have {tmap.n_blocks} block values")
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise ValueError("family functions must be finite and nonnegative")
        out.append(f)
    return out


def _log_powers(f: np.ndarray, c: float) -> np.ndarray:
    """``c * log f`` with ``0 ** 0 = 1`` and ``0 ** c = 0`` for ``c > 0``."""
    if c == 0:
        return np.zeros_like(f)
    with np.errstate(divide="ignore"):
        return c * np.log(f)


def global_sides(model: FiniteMarkovModel, maps: Sequence[FactorMap], c: Any, family: Sequence) -> tuple:
    """``(log LHS, log RHS)`` of ``int prod f_i^{c_i} o T_i dmu <= prod (int f_i o T_i dmu)^{c_i}``."""
    cf = _exponents(c, maps)
    fam = _check_family(maps, family)
    with np.errstate(divide="ignore"):
        log_mu = np.log(model.mu_float)
    exponent = log_mu.copy()
    log_rhs = 0.0
    for tmap, f, ci in zip(maps, fam, cf):
        exponent += _log_powers(f, ci)[tmap.labels_array]
        if ci > 0:
            mass = float(tmap.block_measure_float @ f)
            log_rhs += ci * math.log(mass) if mass > 0 else -math.inf
    return float(logsumexp(exponent)), log_rhs


def global_gap(model, maps, c, family) -> float:
    """``log RHS - log LHS``; nonnegative when the inequality holds.

    ``+inf`` when the left side vanishes (in particular when some ``f_i``
    with ``c_i > 0`` is identically zero).
    """
    log_lhs, log_rhs = global_sides(model, maps, c, family)
    if log_lhs == -math.inf:
        return math.inf
    return log_rhs - log_lhs


def _product_state_function(maps, fam, cf) -> np.ndarray:
    log_prod = np.zeros(len(maps[0].labeling)) if maps else None
    for tmap, f, ci in zip(maps, fam, cf):
        log_prod += _log_powers(f, ci)[tmap.labels_array]
    return np.exp(log_prod)


def local_sides(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    family: Sequence,
    t: float,
    cross_check: bool = False,
) -> tuple:
    """Per-state ``(P_t(prod f_i^{c_i} o T_i), prod (P_t(f_i o T_i))^{c_i})``.

    With ``cross_check`` each ``P_t(f_i o T_i)`` is also computed on the
    quotient chain and compared (``1e-10``).
    """
    cf = _exponents(c, maps)
    fam = _check_family(maps, family)
    n = model.n_states
    lifted = np.stack([f[t_.labels_array] for t_, f in zip(maps, fam)], axis=1)
    prod = _product_state_function(maps, fam, cf)
    evolved = semigroup_apply(model, t, np.column_stack([prod, lifted]))
    lhs = evolved[:, 0]
    Pf = np.maximum(evolved[:, 1:], 0.0)
    if cross_check:
        for j, (tmap, f) in enumerate(zip(maps, fam)):
            q = quotient_model(model, tmap)
            via_quotient = semigroup_apply(q, t, f)[tmap.labels_array]
            err = float(np.max(np.abs(via_quotient - Pf[:, j])))
            if err > 1e-10 * max(1.0, float(np.max(f))):
                raise AssertionError(f"quotient semigroup mismatch for {tmap.name!r}: {err:.3e}")
    rhs = np.ones(n)
    for j, ci in enumerate(cf):
        if ci > 0:
            rhs = rhs * Pf[:, j] ** ci
    return lhs, rhs


def local_gap(model, maps, c, family, t: float, x: int | None = None, log: bool = False,
              cross_check: bool = False):
    """``RHS(x) - LHS(x)`` of the local inequality (all states when ``x`` is None).

    ``log=True`` returns ``log RHS - log LHS`` instead, the quantity that
    tends to :func:`global_gap` as ``t -> infinity``.
    """
    lhs, rhs = local_sides(model, maps, c, family, t, cross_check=cross_check)
    if log:
        with np.errstate(divide="ignore"):
            gap = np.log(rhs) - np.log(lhs)
        gap = np.where(lhs <= 0, np.inf, gap)
    else:
        gap = rhs - lhs
    return gap if x is None else float(gap[x])


def interpolation_profile(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    family: Sequence,
    t: float,
    grid_size: int = 21,
) -> tuple:
    """``alpha(s) = P_s(exp(sum_i c_i log P_{t-s}(f_i o T_i)))`` on a uniform grid of ``[0, t]``.

    Returns ``(s_grid, alpha)`` with ``alpha`` of shape ``(grid_size, n_states)``.
    ``alpha[0]`` is the right side of the local inequality and
    ``alpha[-1]`` the left side.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    cf = _exponents(c, maps)
    fam = _check_family(maps, family)
    if any(np.any(f <= 0) for f in fam):
        raise ValueError("interpolation needs strictly positive functions")
    lifted = np.stack([f[t_.labels_array] for t_, f in zip(maps, fam)], axis=1)
    grid = np.linspace(0.0, t, grid_size)
    alpha = np.empty((grid_size, model.n_states))
    for k, s in enumerate(grid):
        inner = semigroup_apply(model, max(t - s, 0.0), lifted)
        H = np.log(inner) @ cf
        alpha[k] = semigroup_apply(model, s, np.exp(H))
    return grid, alpha


def is_nonincreasing(alpha: np.ndarray, slack: float = 1e-9) -> bool:
    return bool(np.all(np.diff(alpha, axis=0) <= slack))


# ---------------------------------------------------------------- families


def lognormal_family(maps: Sequence[FactorMap], rng: np.random.Generator,
                     sigma: float = 1.0, normalize: bool = True) -> list:
    """``exp(sigma * N(0, 1))`` block values, optionally rescaled to unit mean."""
    fam = []
    for tmap in maps:
        f = np.exp(sigma * rng.standard_normal(tmap.n_blocks))
        if normalize:
            f = f / float(tmap.block_measure_float @ f)
        fam.append(f)
    return fam


def indicator_families(model: FiniteMarkovModel, maps: Sequence[FactorMap]) -> list:
    """``f_i = 1[T_i = T_i(x)]`` for each state ``x`` (distinct families only)."""
    seen = set()
    out = []
    for x in range(model.n_states):
        key = tuple(t.labeling[x] for t in maps)
        if key in seen:
            continue
        seen.add(key)
        fam = []
        for tmap in maps:
            f = np.zeros(tmap.n_blocks)
            f[tmap.labeling[x]] = 1.0
            fam.append(f)
        out.append(fam)
    return out


# ----------------------------------------------------------- adversarial


def _ascent(model, maps, cf, u: list, steps: int, eta: float) -> list:
    """Block-coordinate ascent of ``log LHS - log RHS`` in log coordinates ``u_i = log f_i``."""
    with np.errstate(divide="ignore"):
        log_mu = np.log(model.mu_float)
    labs = [t.labels_array for t in maps]
    nus = [t.block_measure_float for t in maps]
    for _ in range(steps):
        for i, ci in enumerate(cf):
            if ci == 0:
                continue
            H = log_mu.copy()
            for j, cj in enumerate(cf):
                H += cj * u[j][labs[j]]
            p = np.exp(H - logsumexp(H))
            w = np.bincount(labs[i], weights=p, minlength=maps[i].n_blocks)
            q = nus[i] * np.exp(u[i] - u[i].max())
            q /= q.sum()
            # d/du_i(b) of the objective, i.e. f * d/df for the multiplicative step
            u[i] = u[i] + eta * ci * (w - q)
    return u


def adversarial_search(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    iters: int = 50,
    seed: int = 0,
    steps: int = 200,
    eta: float = 0.1,
) -> tuple:
    """Look for the family with the smallest global gap.

    Candidates are the constants, the block indicator families and ``iters`` random
    restarts, each improved by ``steps`` multiplicative ascent sweeps
    ``f <- f exp(eta * f df)``.  Returns ``(worst_family, min_gap)``.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    cf = _exponents(c, maps)
    rng = np.random.default_rng(seed)
    best_fam = [np.ones(t.n_blocks) for t in maps]
    best_gap = global_gap(model, maps, c, best_fam)
    for fam in indicator_families(model, maps):
        g = global_gap(model, maps, c, fam)
        if g < best_gap:
            best_fam, best_gap = fam, g
    for _ in range(iters):
        u = [rng.standard_normal(t.n_blocks) for t in maps]
        u = _ascent(model, maps, cf, u, steps, eta)
        fam = [np.exp(ui - ui.max()) for ui in u]
        g = global_gap(model, maps, c, fam)
        if g < best_gap:
            best_fam, best_gap = fam, g
    return best_fam, best_gap


# ------------------------------------------------------------ trial suites


@dataclass
class TrialReport:
    seed: int
    trials: int
    min_global_gap: float | None = None
    min_local_gap: float | None = None
    min_interpolation_slack: float | None = None
    n_violations: int = 0
    worst_family: list | None = None
    criterion_passed: bool | None = None
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "criterion_passed": self.criterion_passed,
            "min_global_gap": self.min_global_gap,
            "min_local_gap": self.min_local_gap,
            "min_interpolation_slack": self.min_interpolation_slack,
            "n_violations": self.n_violations,
            "worst_family": None if self.worst_family is None
            else [list(map(float, f)) for f in self.worst_family],
            "failures": self.failures,
        }


def _one_trial(model, maps, c, seed_seq, interpolation: bool, grid_size: int, t_interp: float):
    rng = np.random.default_rng(seed_seq)
    fam = lognormal_family(maps, rng)
    t = float(10 ** rng.uniform(-2, 1))
    g = global_gap(model, maps, c, fam)
    lg = float(np.min(local_gap(model, maps, c, fam, t)))
    slack = None
    if interpolation:
        _, alpha = interpolation_profile(model, maps, c, fam, t_interp, grid_size)
        slack = float(np.max(np.diff(alpha, axis=0)))
    return fam, t, g, lg, slack


def random_trial_suite(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    trials: int,
    seed: int = 0,
    tol: float = 1e-12,
    interpolation: bool = False,
    grid_size: int = 21,
    t_interp: float = 2.0,
) -> TrialReport:
    """Global, local (random ``t`` in ``[0.01, 10]``) and optional interpolation checks.

    Each trial draws a unit-mean log-normal family from its own child seed,
    so reports do not depend on ``BLV_THREADS``.
    """
    report = TrialReport(seed=seed, trials=trials)
    if trials <= 0:
        return report
    report.criterion_passed = check_edge_criterion(edge_active_sets(model, maps), c).passed
    # one quotient cross-check per suite; it does not depend on the draw
    rng = np.random.default_rng(seed)
    local_gap(model, maps, c, lognormal_family(maps, rng), 1.0, cross_check=True)

    children = np.random.SeedSequence(seed).spawn(trials)

    def run(ss):
        return _one_trial(model, maps, c, ss, interpolation, grid_size, t_interp)

    threads = max_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, children))
    else:
        results = [run(ss) for ss in children]

    min_g = min_l = math.inf
    min_s = -math.inf if interpolation else None
    for k, (fam, t, g, lg, slack) in enumerate(results):
        violated = []
        if g < -tol:
            violated.append("global")
        if lg < -tol:
            violated.append("local")
        if interpolation and slack > 1e-9:
            violated.append("interpolation")
        if violated:
            report.n_violations += 1
            report.failures.append({"trial": k, "t": t, "kinds": violated})
        if g < min_g:
            min_g = g
            report.worst_family = fam
        min_l = min(min_l, lg)
        if interpolation:
            min_s = max(min_s, slack)
    report.min_global_gap = min_g
    report.min_local_gap = min_l
    # reported as the worst (largest) increase of alpha between grid points
    report.min_interpolation_slack = min_s
    return report
