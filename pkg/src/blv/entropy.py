"""Entropy, Fisher information and their behaviour under conditional densities."""

from __future__ import annotations

import math
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.special import xlogy

from .bl import as_exponents, check_edge_criterion, edge_active_sets
from .markov import (
    FiniteMarkovModel,
    _as_float,
    dirichlet_form,
    generator_form,
    semigroup_apply,
)
from .quotient import FactorMap, conditional_density
from .verify import adversarial_search, global_gap, lognormal_family

__all__ = [
    "NonReversibleError",
    "as_density",
    "random_density",
    "entropy",
    "fisher",
    "entropy_gap",
    "fisher_gap",
    "fisher_identity_residual",
    "dual_fisher_gap",
    "adaptive_simpson",
    "DeBruijnResult",
    "debruijn_check",
    "equivalence_consistency",
    "prop23_consistency",
]


class NonReversibleError(ValueError):
    pass


def as_density(model: FiniteMarkovModel, f: Any, tol: float = 1e-12) -> np.ndarray:
    fv = _as_float(f)
    if fv.shape != (model.n_states,):
        raise ValueError(f"density must have {model.n_states} entries")
    if np.any(fv < 0) or not np.all(np.isfinite(fv)):
        raise ValueError("density must be finite and nonnegative")
    mean = float(model.mu_float @ fv)
    if abs(mean - 1.0) > tol:
        raise ValueError(f"f is not a probability density: mu-mean = {mean!r}")
    return fv


def _positive(model: FiniteMarkovModel, f: Any) -> np.ndarray:
    fv = as_density(model, f)
    if np.any(fv <= 0):
        raise ValueError("Fisher information needs a strictly positive density")
    return fv


def random_density(model: FiniteMarkovModel, rng: np.random.Generator, sigma: float = 1.0) -> np.ndarray:
    f = np.exp(sigma * rng.standard_normal(model.n_states))
    return f / float(model.mu_float @ f)


def entropy(model: FiniteMarkovModel, f: Any) -> float:
    """``sum mu f log f`` with ``0 log 0 = 0``."""
    fv = as_density(model, f)
    return float(model.mu_float @ xlogy(fv, fv))


def fisher(model: FiniteMarkovModel, f: Any) -> float:
    """``J(f) = -sum mu f L(log f)``.

    For reversible models this is also the carré du champ sum
    ``sum mu Gamma(f, log f)``; both routes are computed and compared.
    """
    fv = _positive(model, f)
    lf = np.log(fv)
    J = generator_form(model, fv, lf)
    if model.reversible:
        J_gamma = dirichlet_form(model, fv, lf)
        if abs(J - J_gamma) > 1e-9 * (1.0 + abs(J)):
            raise AssertionError(f"Fisher routes disagree: {J!r} vs {J_gamma!r}")
        return J_gamma
    return J


def _marginals(model, maps, f) -> list:
    return [np.asarray(conditional_density(model, t, f), dtype=float) for t in maps]


def entropy_gap(model: FiniteMarkovModel, maps: Sequence[FactorMap], c: Any, f: Any) -> float:
    """``Ent(f) - sum c_i Ent(f_i)`` with ``f_i`` the conditional density along ``T_i``."""
    cf = [float(v) for v in as_exponents(c, len(maps))]
    fv = as_density(model, f)
    return entropy(model, fv) - sum(ci * entropy(model, fi) for ci, fi in zip(cf, _marginals(model, maps, fv)))


def fisher_identity_residual(model: FiniteMarkovModel, tmap: FactorMap, f: Any) -> float:
    """``|J(f_T) - E(f, log f_T)|``; zero because ``L log f_T`` is ``T``-measurable."""
    fv = _positive(model, f)
    fi = np.asarray(conditional_density(model, tmap, fv), dtype=float)
    return abs(fisher(model, fi) - generator_form(model, fv, np.log(fi)))


def fisher_gap(model: FiniteMarkovModel, maps: Sequence[FactorMap], c: Any, f: Any) -> float:
    """``J(f) - sum c_i J(f_i)``.

    Each ``J(f_i)`` is computed both directly and as ``E(f, log f_i)``.
    """
    cf = [float(v) for v in as_exponents(c, len(maps))]
    fv = _positive(model, f)
    total = fisher(model, fv)
    for ci, fi in zip(cf, _marginals(model, maps, fv)):
        Ji = fisher(model, fi)
        other = generator_form(model, fv, np.log(fi))
        if abs(Ji - other) > 1e-9 * (1.0 + abs(Ji)):
            raise AssertionError(f"marginal Fisher routes disagree: {Ji!r} vs {other!r}")
        total -= ci * Ji
    return total


def dual_fisher_gap(model: FiniteMarkovModel, f: Any, H: Any) -> float:
    """``J(f) + sum mu f e^{-H} L(e^H) - E(f, H)``, nonnegative for reversible kernels.

    Zero at ``H = log f``.
    """
    if not model.reversible:
        raise NonReversibleError("the dual Fisher bound needs a reversible kernel")
    fv = _positive(model, f)
    Hv = _as_float(H)
    if Hv.shape != fv.shape:
        raise ValueError("H must be a state function")
    r, col = model.rows, model.indices
    # e^{-H} L e^H in edge form, stable for large |H|
    terms = model.weights * np.expm1(Hv[col] - Hv[r])
    drift = np.bincount(r, weights=terms, minlength=model.n_states)
    return fisher(model, fv) + float(model.mu_float @ (fv * drift)) - dirichlet_form(model, fv, Hv)


# ---------------------------------------------------------------- de Bruijn


def adaptive_simpson(fn, a: float, b: float, tol: float = 1e-8, max_depth: int = 40) -> tuple:
    """Adaptive Simpson rule; a panel is accepted when ``|S2 - S1| <= 15 tol``.

    Returns ``(integral, n_evaluations)``.
    """
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return fn(x)

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(lo, hi, fa, fm, fb, whole, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return rec(lo, mid, fa, flm, fm, left, depth - 1) + rec(mid, hi, fm, frm, fb, right, depth - 1)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    total = rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), max_depth)
    return total, evals


class DeBruijnResult(NamedTuple):
    residual: float
    entropy_start: float
    entropy_end: float
    integral: float
    evaluations: int


def debruijn_check(model: FiniteMarkovModel, f: Any, T_max: float = 30.0, tol: float = 1e-8) -> DeBruijnResult:
    """``Ent(f) - int_0^T J(P_t f) dt - Ent(P_T f)``, zero up to quadrature error.

    Requires a reversible irreducible model and a positive density.
    """
    if not model.reversible:
        raise NonReversibleError("de Bruijn check needs a reversible kernel")
    if not model.irreducible:
        raise ValueError("de Bruijn check needs an irreducible kernel")
    if T_max < 0:
        raise ValueError("T_max must be nonnegative")
    fv = _positive(model, f)

    def J_at(t):
        g = semigroup_apply(model, t, fv)
        return dirichlet_form(model, g, np.log(g))

    integral, evals = adaptive_simpson(J_at, 0.0, float(T_max), tol)
    start = entropy(model, fv)
    end_f = semigroup_apply(model, T_max, fv)
    end = float(model.mu_float @ xlogy(end_f, end_f))
    return DeBruijnResult(start - integral - end, start, end, integral, evals)


# ------------------------------------------------------ equivalence check


def _product_density(model, maps, cf, family) -> np.ndarray | None:
    log_f = np.zeros(model.n_states)
    for tmap, fi, ci in zip(maps, family, cf):
        if ci == 0:
            continue
        with np.errstate(divide="ignore"):
            log_f += ci * np.log(np.asarray(fi, dtype=float))[tmap.labels_array]
    if not np.any(np.isfinite(log_f)):
        return None
    dens = np.exp(log_f - np.max(log_f[np.isfinite(log_f)]))
    return dens / float(model.mu_float @ dens)


def equivalence_consistency(
    model: FiniteMarkovModel,
    maps: Sequence[FactorMap],
    c: Any,
    trials: int = 200,
    seed: int = 0,
    tol: float = 1e-12,
    restarts: int = 20,
) -> dict:
    """Run the correlation side and the entropy side and compare their verdicts.

    Correlation side: random log-normal families plus an adversarial search.
    Entropy side: random densities, point masses, and the densities
    ``prod f_i^{c_i} o T_i`` built from the worst families found.
    """
    cf = [float(v) for v in as_exponents(c, len(maps))]
    rng = np.random.default_rng(seed)

    min_i = math.inf
    worst, adv_gap = adversarial_search(model, maps, c, iters=max(1, restarts), seed=seed)
    min_i = min(min_i, adv_gap)
    families = [worst]
    for _ in range(trials):
        fam = lognormal_family(maps, rng)
        g = global_gap(model, maps, c, fam)
        if g < min_i:
            min_i = g
            families.append(fam)

    min_ii = math.inf
    mu = model.mu_float
    for x in range(model.n_states):
        point = np.zeros(model.n_states)
        point[x] = 1.0 / mu[x]
        min_ii = min(min_ii, entropy_gap(model, maps, c, point))
    for fam in families:
        dens = _product_density(model, maps, cf, fam)
        if dens is not None:
            min_ii = min(min_ii, entropy_gap(model, maps, c, dens))
    for _ in range(trials):
        min_ii = min(min_ii, entropy_gap(model, maps, c, random_density(model, rng)))

    min_i, min_ii = float(min_i), float(min_ii)
    violation_i = min_i < -tol
    violation_ii = min_ii < -tol
    return {
        "seed": seed,
        "trials": trials,
        "criterion_passed": check_edge_criterion(edge_active_sets(model, maps), c).passed,
        "min_global_gap": min_i,
        "min_entropy_gap": min_ii,
        "violation_i": violation_i,
        "violation_ii": violation_ii,
        "consistent": violation_i == violation_ii,
    }


prop23_consistency = equivalence_consistency
