import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blv.entropy import (
    NonReversibleError,
    adaptive_simpson,
    debruijn_check,
    dual_fisher_gap,
    entropy,
    entropy_gap,
    fisher,
    fisher_gap,
    fisher_identity_residual,
    equivalence_consistency,
    random_density,
)
from blv.markov import build_model, semigroup_apply
from blv.quotient import conditional_density
from blv.zoo import coordinate_maps, slice_model, symmetric_group_model
from frozen import FLIP_ENTROPY, FLIP_FISHER, S3_POINT_ENTROPY_GAP, S3_POINT_ENTROPY_GAP_ONE

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture(scope="module")
def flip():
    return build_model(["a", "b"], [[0, 1], [1, 0]])


@pytest.fixture(scope="module")
def cycle():
    # lazy walk around a 3-cycle: uniform invariant measure, not reversible
    return build_model([0, 1, 2], [["1/2", "1/2", 0], [0, "1/2", "1/2"], ["1/2", 0, "1/2"]])


def _flip_entropy(b):
    return 0.5 * ((1 + b) * math.log1p(b) + (1 - b) * math.log1p(-b))


def test_flip_closed_forms(flip):
    f = [1.5, 0.5]
    assert abs(entropy(flip, f) - FLIP_ENTROPY) < 1e-15
    assert abs(fisher(flip, f) - FLIP_FISHER) < 1e-15


def test_constant_density(s3):
    assert entropy(s3, np.ones(6)) == 0.0
    assert fisher(s3, np.ones(6)) == 0.0


def test_entropy_allows_zeros_fisher_refuses(s3):
    f = np.zeros(6)
    f[0] = 6.0
    assert abs(entropy(s3, f) - math.log(6)) < 1e-14
    with pytest.raises(ValueError):
        fisher(s3, f)


def test_density_validation(s3):
    with pytest.raises(ValueError):
        entropy(s3, np.full(6, 2.0))


def test_point_mass_entropy_gaps(s3, s3_coords):
    f = np.zeros(6)
    f[0] = 6.0
    assert abs(entropy_gap(s3, s3_coords, "1/2", f) - S3_POINT_ENTROPY_GAP) < 1e-12
    assert abs(entropy_gap(s3, s3_coords, 1, f) - S3_POINT_ENTROPY_GAP_ONE) < 1e-12


@given(seeds)
def test_data_processing(seed):
    model = slice_model(5, 2)
    f = random_density(model, np.random.default_rng(seed))
    for t in coordinate_maps(model):
        assert entropy(model, conditional_density(model, t, f)) <= entropy(model, f) + 1e-14


@given(seeds)
def test_gaps_nonnegative_s3(seed):
    model = symmetric_group_model(3)
    maps = coordinate_maps(model)
    f = random_density(model, np.random.default_rng(seed), sigma=1.5)
    assert entropy_gap(model, maps, "1/2", f) >= -1e-12
    assert fisher_gap(model, maps, "1/2", f) >= -1e-12


def test_single_map_measurable_equality(s3, s3_coords, rng):
    g = rng.exponential(size=3)
    f = g[s3_coords[0].labels_array]
    f /= s3.mu_float @ f
    assert abs(entropy_gap(s3, s3_coords[:1], 1, f)) < 1e-14


@given(seeds)
def test_fisher_identity(seed):
    model = symmetric_group_model(3)
    f = random_density(model, np.random.default_rng(seed))
    for t in coordinate_maps(model):
        assert fisher_identity_residual(model, t, f) <= 1e-12


def test_fisher_non_reversible(cycle):
    f = np.array([1.5, 0.7, 0.8])
    assert fisher(cycle, f) > 0


@given(seeds)
def test_dual_fisher(seed):
    model = symmetric_group_model(3)
    rng = np.random.default_rng(seed)
    f = random_density(model, rng)
    assert dual_fisher_gap(model, f, 4.0 * rng.standard_normal(6)) >= -1e-12
    assert abs(dual_fisher_gap(model, f, np.log(f))) <= 1e-12
    assert abs(dual_fisher_gap(model, f, np.zeros(6)) - fisher(model, f)) <= 1e-13


def test_dual_fisher_refuses_non_reversible(cycle):
    with pytest.raises(NonReversibleError):
        dual_fisher_gap(cycle, np.ones(3), np.zeros(3))


def test_adaptive_simpson_polynomial_and_exp():
    val, _ = adaptive_simpson(lambda x: x**3 - x, 0.0, 2.0)
    assert abs(val - 2.0) < 1e-12
    val, _ = adaptive_simpson(math.exp, 0.0, 1.0, tol=1e-10)
    assert abs(val - (math.e - 1)) < 1e-9


def test_debruijn_flip(flip):
    res = debruijn_check(flip, [1.5, 0.5], 30.0)
    assert abs(res.residual) <= 1e-6
    assert abs(res.integral - (_flip_entropy(0.5) - _flip_entropy(0.5 * math.exp(-60)))) <= 1e-6


def test_debruijn_s3_and_constant(s3, rng):
    assert abs(debruijn_check(s3, random_density(s3, rng)).residual) <= 1e-6
    assert abs(debruijn_check(s3, np.ones(6)).residual) < 1e-14


def test_debruijn_refuses(cycle):
    with pytest.raises(NonReversibleError):
        debruijn_check(cycle, np.ones(3))
    red = build_model([0, 1], [[1, 0], [0, 1]], mu=["1/2", "1/2"])
    with pytest.raises(ValueError, match="irreducible"):
        debruijn_check(red, np.ones(2))


def test_entropy_and_fisher_decay_along_semigroup(s4, rng):
    f = random_density(s4, rng, sigma=2.0)
    grid = np.linspace(0, 5, 26)
    ents = [entropy(s4, semigroup_apply(s4, t, f)) for t in grid]
    fis = [fisher(s4, semigroup_apply(s4, t, f)) for t in grid]
    assert np.all(np.diff(ents) <= 1e-14) and np.all(np.diff(fis) <= 1e-14)
    assert entropy(s4, semigroup_apply(s4, 60.0, f)) < 1e-12


def test_equivalence_consistency(s3, s3_coords):
    ok = equivalence_consistency(s3, s3_coords, "1/2", trials=100)
    assert ok["consistent"] and not ok["violation_i"] and ok["criterion_passed"]
    bad = equivalence_consistency(s3, s3_coords, 1, trials=100)
    assert bad["consistent"] and bad["violation_i"] and bad["violation_ii"]
    assert bad["min_entropy_gap"] <= S3_POINT_ENTROPY_GAP_ONE + 1e-12
    single = equivalence_consistency(s3, s3_coords[:1], 1, trials=50)
    assert single["consistent"] and not single["violation_ii"]
