from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blv.markov import build_model, semigroup_apply
from blv.quotient import (
    NonCommutingMapError,
    check_commutation,
    conditional_density,
    factor_map,
    lift,
    map_from_labeling,
    quotient_model,
)
from blv.zoo import coordinate_maps, slice_model


def _split(draw, total, parts):
    """Random split of a rational mass into ``parts`` positive rationals (keeps the chain irreducible)."""
    w = draw(st.lists(st.integers(1, 4), min_size=parts, max_size=parts))
    return [total * Fraction(v, sum(w)) for v in w]


@st.composite
def lumpable_chains(draw):
    """A chain built from a positive block kernel Q by splitting each Q(a, b) inside block b."""
    m = draw(st.integers(1, 3))
    sizes = draw(st.lists(st.integers(1, 3), min_size=m, max_size=m))
    Q = []
    for _ in range(m):
        w = draw(st.lists(st.integers(1, 6), min_size=m, max_size=m))
        Q.append([Fraction(v, sum(w)) for v in w])
    labeling = [a for a, s in enumerate(sizes) for _ in range(s)]
    members = [[x for x, a in enumerate(labeling) if a == b] for b in range(m)]
    rows = []
    for x, a in enumerate(labeling):
        row = [Fraction(0)] * len(labeling)
        for b in range(m):
            for y, v in zip(members[b], _split(draw, Q[a][b], len(members[b]))):
                row[y] += v
        rows.append(row)
    return rows, labeling, Q


@given(lumpable_chains())
def test_lumpable_chain_commutes(data):
    rows, labeling, Q = data
    model = build_model(list(range(len(rows))), rows)
    t = map_from_labeling(model, labeling)
    assert check_commutation(model, t).commutes
    q = quotient_model(model, t)
    assert q.kernel == Q
    assert q.mu == t.block_measure


@given(lumpable_chains(), st.floats(0.0, 5.0))
def test_semigroup_intertwines(data, time):
    rows, labeling, _ = data
    model = build_model(list(range(len(rows))), rows)
    t = map_from_labeling(model, labeling)
    g = np.linspace(-1.0, 2.0, t.n_blocks)
    q = quotient_model(model, t)
    assert np.allclose(semigroup_apply(model, time, lift(t, g)), lift(t, semigroup_apply(q, time, g)), atol=1e-12)


def test_non_commuting_witness():
    # slice (4, 2) with the pair-product map x1 * x2
    model = slice_model(4, 2)
    t = factor_map(model, [x[0] * x[1] for x in model.labels], "x1x2")
    report = check_commutation(model, t)
    assert not report.commutes
    x, y, b = report.witness
    assert t.labeling[x] == t.labeling[y]
    mass = lambda z: sum(w for v, w in model.row(z) if t.labeling[v] == b)
    assert (mass(x), mass(y)) == (report.mass_x, report.mass_y)
    assert report.mass_x != report.mass_y
    with pytest.raises(NonCommutingMapError):
        quotient_model(model, t)


def test_non_commuting_exact_path_agrees():
    model = slice_model(4, 2)
    t = factor_map(model, [x[0] * x[1] for x in model.labels], "x1x2")
    from blv import quotient

    fast = quotient._check_commutation_vectorized(model, t)
    sums = quotient._block_sums(model, t)
    x, y, b = fast.witness
    assert sums[x].get(b, 0) != sums[y].get(b, 0)


def test_map_validation(s3):
    with pytest.raises(ValueError, match="surjective"):
        map_from_labeling(s3, [0, 0, 2, 2, 2, 2])
    with pytest.raises(ValueError):
        map_from_labeling(s3, [0, 1])
    m = build_model([0, 1], [[1, 0], [0, 1]], mu=[1, 0])
    with pytest.raises(ValueError, match="zero mass"):
        map_from_labeling(m, [0, 1])


def test_conditional_density_exact(s3, s3_coords):
    f = [Fraction(0)] * 6
    f[0] = Fraction(6)
    fi = conditional_density(s3, s3_coords[0], f)
    assert fi == [Fraction(3) if x[0] == 1 else Fraction(0) for x in s3.labels]


def test_conditional_density_validation(s3, s3_coords):
    with pytest.raises(ValueError, match="density"):
        conditional_density(s3, s3_coords[0], np.ones(6) * 2)
    with pytest.raises(ValueError, match="negative"):
        conditional_density(s3, s3_coords[0], [3.0, -1, 1, 1, 1, 1])


def test_conditional_density_preserves_mass(s4, s4_coords, rng):
    f = rng.exponential(size=24)
    f /= f.mean()
    for t in s4_coords:
        fi = conditional_density(s4, t, f)
        assert abs(s4.mu_float @ fi - 1) < 1e-12
        # T-measurable
        assert all(np.ptp(fi[t.labels_array == b]) < 1e-15 for b in range(t.n_blocks))


def test_slice_coordinates_commute():
    model = slice_model(6, 3)
    assert all(check_commutation(model, t).commutes for t in coordinate_maps(model))
