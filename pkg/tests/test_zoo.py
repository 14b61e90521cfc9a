from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blv.bl import check_edge_criterion, edge_active_sets, pair_condition_check
from blv.markov import ModelError
from blv.zoo import (
    ZooSpec,
    build_zoo,
    color_family_maps,
    coordinate_maps,
    cyclic_group_table,
    cayley_model,
    cyclic_model,
    hypergeometric_map,
    hypergeometric_pmf,
    image_map,
    product_model,
    projection_map,
    restriction_map,
    slice_model,
    symmetric_group_model,
)
from oracles import bernoulli_laplace, hypergeometric_counts, product_states


def test_slice_matches_rebuild():
    for n, k in [(4, 2), (5, 2), (6, 3)]:
        model = slice_model(n, k)
        states, K = bernoulli_laplace(n, k)
        assert list(model.labels) == states
        assert model.kernel == K
        assert model.reversible


def test_size_caps():
    with pytest.raises(ModelError):
        symmetric_group_model(9)
    with pytest.raises(ModelError):
        ZooSpec("slice", {"n": 20, "k": 10})
    with pytest.raises(ModelError):
        ZooSpec("nope", {})


def test_build_zoo_dispatch():
    assert build_zoo(ZooSpec("slice", {"n": 4, "k": 1})).n_states == 4
    assert build_zoo(ZooSpec("symmetric_group", {"n": 3})).n_states == 6


def test_restriction_and_image_blocks(s4):
    assert restriction_map(s4, [1, 2]).n_blocks == 12
    assert image_map(s4, [1, 2]).n_blocks == 6
    with pytest.raises(ValueError):
        restriction_map(s4, [0])


def test_hypergeometric_small_enumeration():
    model = symmetric_group_model(5)
    for m in [(2, 3), (1, 2, 2), (1, 1, 1, 2)]:
        for K in range(6):
            t = hypergeometric_map(model, m, K)
            law = hypergeometric_counts(m, K)
            assert dict(zip(t.block_labels, t.block_measure)) == law


def test_hypergeometric_pmf_formula():
    pmf = hypergeometric_pmf((2, 3), 2)
    assert pmf == {(0, 2): Fraction(3, 10), (1, 1): Fraction(6, 10), (2, 0): Fraction(1, 10)}
    assert sum(hypergeometric_pmf((3, 1, 2), 3).values()) == 1


def test_hypergeometric_rejects_bad_colors(s4):
    with pytest.raises(ValueError):
        hypergeometric_map(s4, (2, 1), 1)
    with pytest.raises(ValueError):
        hypergeometric_map(s4, (2, 2), 5)


color_families = st.lists(
    st.tuples(st.sets(st.integers(1, 3), min_size=1, max_size=2),
              st.sampled_from(["restriction", "image"]),
              st.fractions(0, 1, max_denominator=4)),
    min_size=1, max_size=3,
)


@given(color_families, st.integers(1, 4))
def test_color_families_follow_pair_condition(family, K):
    # colors (2, 2, 1) on S_5; within-color swaps leave every count unchanged
    model = symmetric_group_model(5)
    maps = color_family_maps(model, (2, 2, 1), K, [(sorted(I), kind) for I, kind, _ in family])
    c = [cI for _, _, cI in family]
    edge = check_edge_criterion(edge_active_sets(model, maps), c)
    assert edge.passed == pair_condition_check(family, 3).passed


def test_product_model_and_finner_sets():
    model = product_model([["1/2", "1/2"], ["1/3", "1/3", "1/3"], ["1/4", "3/4"]])
    assert list(model.labels) == product_states((2, 3, 2))
    assert model.mu[0] == Fraction(1, 24)
    assert model.reversible
    S = [(1, 2), (2, 3), (1, 3)]
    system = edge_active_sets(model, [projection_map(model, s) for s in S])
    expected = {tuple(i for i, s in enumerate(S) if j in s) for j in (1, 2, 3)}
    assert set(system.active_sets) == expected


def test_product_rejects_bad_marginals():
    with pytest.raises(ModelError):
        product_model([["1/2", "1/3"]])
    with pytest.raises(ModelError):
        product_model([[1, 0]])


def test_cyclic_model_generator_sets():
    model, maps, gens = cyclic_model(6, [1, -1], [2, 3])
    assert model.n_states == 6 and [t.n_blocks for t in maps] == [2, 3]
    system = edge_active_sets(model, maps)
    assert set(system.active_sets) == {gens[1], gens[5]} == {(0, 1)}
    # both reductions move with every step, so their exponents must sum to at most 1
    assert check_edge_criterion(system, "1/2").passed
    assert not check_edge_criterion(system, "2/3").passed


def test_cyclic_model_rejects():
    with pytest.raises(ModelError):
        cyclic_model(6, [2])  # does not generate
    with pytest.raises(ModelError):
        cyclic_model(6, [1], [4])


def test_cayley_checks_homomorphism():
    table = cyclic_group_table(4)
    with pytest.raises(ModelError):
        cayley_model(table, [1, 3], [("bad", [0, 1, 1, 0], cyclic_group_table(2))])


def test_coordinate_maps_on_products():
    model = product_model([(2, ["1/2", "1/2"]), (2, ["1/5", "4/5"])])
    names = [t.name for t in coordinate_maps(model)]
    assert names == ["x_1", "x_2"]
