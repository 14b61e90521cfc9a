from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blv.bl import (
    as_exponents,
    bl_residuals,
    check_bl_pointwise,
    check_edge_criterion,
    edge_active_sets,
    exponent_formulas,
    falsify_bl,
    optimize_exponents,
    pair_condition_check,
    random_pointwise_check,
)
from blv.quotient import NonCommutingMapError, factor_map
from blv.zoo import coordinate_maps, image_map, restriction_map, slice_model, symmetric_group_model
from oracles import pair_counts

exponent = st.fractions(0, 1, max_denominator=12)


def test_s3_active_sets(s3, s3_coords):
    system = edge_active_sets(s3, s3_coords)
    assert sorted(system.active_sets) == [(0, 1), (0, 2), (1, 2)]
    assert list(system.edge_counts()) == [6, 6, 6]
    assert system.n_edges == 18


def test_active_sets_by_hand(s3, s3_coords):
    # the edge id -> (2 1 3) changes the first two coordinates only
    system = edge_active_sets(s3, s3_coords)
    idx = {s: i for i, s in enumerate(s3.labels)}
    found = {(x, y): I for x, y, I in system.edges()}
    assert found[idx[(1, 2, 3)], idx[(2, 1, 3)]] == (0, 1)


def test_criterion_half_passes_one_fails(s3, s3_coords):
    system = edge_active_sets(s3, s3_coords)
    v = check_edge_criterion(system, "1/2")
    assert v.passed and v.max_sum == 1
    v = check_edge_criterion(system, 1)
    assert not v.passed and v.witness_sum == 2
    assert len(v.witness_set) == 2


def test_refuses_non_commuting():
    model = slice_model(4, 2)
    bad = factor_map(model, [x[0] * x[1] for x in model.labels], "x1x2")
    with pytest.raises(NonCommutingMapError):
        edge_active_sets(model, [bad])


@pytest.mark.parametrize("n", [3, 4])
def test_lp_symmetric_group(n):
    model = symmetric_group_model(n)
    c, obj = optimize_exponents(edge_active_sets(model, coordinate_maps(model)))
    assert c == (Fraction(1, 2),) * n
    assert obj == Fraction(n, 2)


def test_lp_slice():
    model = slice_model(4, 2)
    c, _ = optimize_exponents(edge_active_sets(model, coordinate_maps(model)))
    assert c == (Fraction(1, 2),) * 4


def test_lp_weights(s3, s3_coords):
    c, obj = optimize_exponents(edge_active_sets(s3, s3_coords), weights=[1, 0, 0])
    assert c[0] == 1 and obj == 1


def test_as_exponents():
    assert as_exponents("1/2", 3) == (Fraction(1, 2),) * 3
    assert as_exponents("1/2,1/3", 2) == (Fraction(1, 2), Fraction(1, 3))
    with pytest.raises(ValueError):
        as_exponents("3/2", 2)
    with pytest.raises(ValueError):
        as_exponents("1/2,1/2", 3)
    assert as_exponents("3/2", 1, bounded=False) == (Fraction(3, 2),)


def test_residuals_match_exponential_form(s3, s3_coords, rng):
    c = [0.5, 0.3, 0.2]
    F = [rng.normal(size=3) for _ in range(3)]
    states = [f[t.labels_array] for f, t in zip(F, s3_coords)]
    H = sum(ci * f for ci, f in zip(c, states))
    K = np.array([[float(v) for v in row] for row in s3.kernel])
    L = lambda g: K @ g - g
    direct = np.exp(-H) * L(np.exp(H)) - sum(ci * np.exp(-f) * L(np.exp(f)) for ci, f in zip(c, states))
    assert np.allclose(bl_residuals(s3, s3_coords, "1/2,3/10,1/5", F), direct, atol=1e-13)
    assert np.allclose(bl_residuals(s3, s3_coords, "1/2,3/10,1/5", states, on_states=True), direct, atol=1e-13)


def test_on_states_requires_measurability(s3, s3_coords):
    with pytest.raises(ValueError, match="constant"):
        bl_residuals(s3, s3_coords, "1/2", [np.arange(6.0)] * 3, on_states=True)


@given(st.tuples(exponent, exponent, exponent))
def test_criterion_decides_pointwise_condition(c):
    model = symmetric_group_model(3)
    maps = coordinate_maps(model)
    system = edge_active_sets(model, maps)
    if check_edge_criterion(system, c).passed:
        assert random_pointwise_check(model, maps, c, draws=60, seed=1) <= 1e-12
    else:
        assert falsify_bl(model, maps, c, system).residual > 0


def test_falsifier_s3(s3, s3_coords):
    fr = falsify_bl(s3, s3_coords, 1)
    assert fr.residual > 0 and len(fr.active_set) == 2


def test_falsifier_near_threshold(s3, s3_coords):
    # {x_2, x_3} sums to 61/60: a fixed ramp of height 20 is not enough
    fr = falsify_bl(s3, s3_coords, (0, Fraction(3, 5), Fraction(5, 12)))
    assert fr.residual > 0 and fr.active_set == (1, 2) and fr.theta > 20


def test_ramp_residual_matches_direct(s3, s3_coords):
    from blv.bl import _ramp_residual, theta_ramp_family

    cf = np.array([0.7, 0.6, 0.2])
    for x in range(6):
        direct = bl_residuals(s3, s3_coords, cf, theta_ramp_family(s3_coords, s3, x, 3.0))[x]
        value, scale = _ramp_residual(s3, s3_coords, cf, x, 3.0)
        assert scale == 0.0 and value == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_constant_functions_give_zero(s3, s3_coords):
    assert check_bl_pointwise(s3, s3_coords, 1, [np.ones(3)] * 3) == 0.0


families = st.lists(
    st.tuples(
        st.sets(st.integers(1, 4), min_size=1, max_size=3),
        st.sampled_from(["restriction", "image"]),
        st.fractions(0, 1, max_denominator=6),
    ),
    min_size=1,
    max_size=4,
)


@given(families)
def test_pair_condition_equals_edge_criterion_on_s4(family):
    model = symmetric_group_model(4)
    maps = [(restriction_map if kind == "restriction" else image_map)(model, sorted(I)) for I, kind, _ in family]
    c = [cI for _, _, cI in family]
    edge = check_edge_criterion(edge_active_sets(model, maps), c)
    pair = pair_condition_check(family, 4)
    assert edge.passed == pair.passed
    assert edge.max_sum == pair.max_sum


def test_pair_condition_examples():
    partition = [({1, 2}, "restriction", "1/2"), ({3, 4}, "restriction", "1/2")]
    assert pair_condition_check(partition, 4).passed
    blocks = [({1, 2}, "image", 1), ({3, 4}, "image", 1)]
    v = pair_condition_check(blocks, 4)
    assert not v.passed and v.max_sum == 2
    with pytest.raises(ValueError):
        pair_condition_check([((), "image", 1)])
    with pytest.raises(ValueError):
        pair_condition_check([({1}, "other", 1)])


@pytest.mark.parametrize("n", range(2, 11))
def test_exponent_formulas_bruteforce(n):
    for k in range(1, n):
        ef = exponent_formulas(n, k)
        assert (ef.p, ef.q) == pair_counts(n, k)
        assert ef.naive >= ef.p >= ef.q


def test_exponent_formulas_agree_with_pair_check():
    for n in range(3, 7):
        for k in range(1, n):
            ef = exponent_formulas(n, k)
            subsets = list(combinations(range(1, n + 1), k))
            assert pair_condition_check([(I, "restriction", Fraction(1, ef.p)) for I in subsets], n).max_sum == 1
            assert pair_condition_check([(I, "image", Fraction(1, ef.q)) for I in subsets], n).max_sum == 1


def test_exponent_formulas_range():
    with pytest.raises(ValueError):
        exponent_formulas(3, 3)
