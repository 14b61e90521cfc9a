"""Constructors for the standard discrete examples and their factor maps.

Permutations are one-line tuples ``(x(1), ..., x(n))`` over ``{1..n}`` in
lexicographic order.  The random transposition walk moves ``x`` to
``tau o x``, i.e. swaps two *values* in the one-line notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from typing import Any, Sequence

from .markov import FiniteMarkovModel, ModelError, build_model, to_fraction
from .quotient import FactorMap, NonCommutingMapError, check_commutation, factor_map

__all__ = [
    "ZooSpec",
    "MAX_PERMUTATION_N",
    "MAX_STATES",
    "symmetric_group_model",
    "restriction_map",
    "image_map",
    "slice_model",
    "coordinate_maps",
    "hypergeometric_map",
    "hypergeometric_pmf",
    "color_family_maps",
    "product_model",
    "projection_map",
    "cyclic_group_table",
    "cayley_model",
    "cyclic_model",
    "build_zoo",
]

MAX_PERMUTATION_N = 8
MAX_STATES = 50_000


@dataclass(frozen=True)
class ZooSpec:
    """Validated description of a zoo model.

    kind is one of ``symmetric_group``, ``slice``, ``product``, ``cayley``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.kind == "symmetric_group":
            n = int(p["n"])
            if not 2 <= n <= MAX_PERMUTATION_N:
                raise ModelError(f"symmetric group needs 2 <= n <= {MAX_PERMUTATION_N}, got {n}")
        elif self.kind == "slice":
            n, k = int(p["n"]), int(p["k"])
            if not 1 <= k <= n - 1:
                raise ModelError(f"slice needs 1 <= k <= n-1, got n={n}, k={k}")
            if math.comb(n, k) > MAX_STATES:
                raise ModelError(f"slice ({n}, {k}) exceeds {MAX_STATES} states")
        elif self.kind == "product":
            sizes = [len(nu) for nu in p["measures"]]
            if math.prod(sizes) > MAX_STATES:
                raise ModelError(f"product space exceeds {MAX_STATES} states")
        elif self.kind == "cayley":
            if len(p["table"]) > MAX_STATES:
                raise ModelError(f"group exceeds {MAX_STATES} elements")
        else:
            raise ModelError(f"unknown zoo kind {self.kind!r}")


def build_zoo(spec: ZooSpec) -> FiniteMarkovModel:
    p = spec.params
    if spec.kind == "symmetric_group":
        return symmetric_group_model(int(p["n"]))
    if spec.kind == "slice":
        return slice_model(int(p["n"]), int(p["k"]))
    if spec.kind == "product":
        return product_model(p["measures"])
    return cayley_model(p["table"], p["generators"])[0]


def _verified(model: FiniteMarkovModel, tmap: FactorMap) -> FactorMap:
    report = check_commutation(model, tmap)
    if not report.commutes:
        raise NonCommutingMapError(f"{tmap.name} fails to commute (witness {report.witness})")
    return tmap


# ----------------------------------------------------------- symmetric group


def symmetric_group_model(n: int) -> FiniteMarkovModel:
    """Random transposition walk on S_n, ``K(x, tau x) = 2 / (n (n-1))``."""
    if not 2 <= n <= MAX_PERMUTATION_N:
        raise ModelError(f"symmetric group needs 2 <= n <= {MAX_PERMUTATION_N}, got {n}")
    states = list(permutations(range(1, n + 1)))
    index = {s: i for i, s in enumerate(states)}
    w = Fraction(2, n * (n - 1))
    pairs = list(combinations(range(1, n + 1), 2))
    rows = []
    for x in states:
        row = {}
        for a, b in pairs:
            y = tuple(b if v == a else a if v == b else v for v in x)
            row[index[y]] = w
        rows.append(row)
    mu = [Fraction(1, len(states))] * len(states)
    return build_model(states, rows, mu)


def _perm_size(model: FiniteMarkovModel) -> int:
    return len(model.labels[0])


def _check_index_set(n: int, I: Sequence[int]) -> tuple:
    I = tuple(sorted(set(int(i) for i in I)))
    if not I:
        raise ValueError("index set must be nonempty")
    if I[0] < 1 or I[-1] > n:
        raise ValueError(f"index set must lie in 1..{n}")
    return I


def restriction_map(model: FiniteMarkovModel, I: Sequence[int]) -> FactorMap:
    """``T_I(x) = (x(i))_{i in I}`` on a symmetric-group model."""
    I = _check_index_set(_perm_size(model), I)
    keys = [tuple(x[i - 1] for i in I) for x in model.labels]
    name = "T_{" + ",".join(map(str, I)) + "}"
    return _verified(model, factor_map(model, keys, name))


def image_map(model: FiniteMarkovModel, I: Sequence[int]) -> FactorMap:
    """``R_I(x) = x(I)`` as a sorted tuple of values."""
    I = _check_index_set(_perm_size(model), I)
    keys = [tuple(sorted(x[i - 1] for i in I)) for x in model.labels]
    name = "R_{" + ",".join(map(str, I)) + "}"
    return _verified(model, factor_map(model, keys, name))


# ------------------------------------------------------------------ slices


def slice_model(n: int, k: int) -> FiniteMarkovModel:
    """Bernoulli-Laplace walk on ``{x in {0,1}^n : sum x = k}``."""
    ZooSpec("slice", {"n": n, "k": k})
    states = []
    for ones in combinations(range(n), k):
        x = [0] * n
        for i in ones:
            x[i] = 1
        states.append(tuple(x))
    states.sort()
    index = {s: i for i, s in enumerate(states)}
    w = Fraction(1, k * (n - k))
    rows = []
    for x in states:
        row = {}
        for i in range(n):
            if x[i] != 1:
                continue
            for j in range(n):
                if x[j] == 0:
                    y = list(x)
                    y[i], y[j] = 0, 1
                    row[index[tuple(y)]] = w
        rows.append(row)
    return build_model(states, rows, [Fraction(1, len(states))] * len(states))


def coordinate_maps(model: FiniteMarkovModel) -> list:
    """Single-coordinate maps ``x -> x_i`` (for slices, products, or permutations)."""
    n = len(model.labels[0])
    return [
        _verified(model, factor_map(model, [x[i] for x in model.labels], f"x_{i + 1}"))
        for i in range(n)
    ]


# ---------------------------------------------------------- hypergeometric


def _color_intervals(m: Sequence[int]) -> list:
    out, start = [], 0
    for size in m:
        out.append(range(start, start + size))
        start += size
    return out


def hypergeometric_pmf(m: Sequence[int], K: int) -> dict:
    """Exact multivariate hypergeometric law ``prod C(m_i, k_i) / C(M, K)``."""
    M = sum(m)
    total = math.comb(M, K)
    out = {}
    for ks in product(*(range(mi + 1) for mi in m)):
        if sum(ks) == K:
            out[ks] = Fraction(math.prod(math.comb(mi, ki) for mi, ki in zip(m, ks)), total)
    return out


def _validate_colors(model: FiniteMarkovModel, m: Sequence[int], K: int) -> list:
    m = [int(v) for v in m]
    M = _perm_size(model)
    if any(v <= 0 for v in m):
        raise ValueError("color counts must be positive")
    if sum(m) != M:
        raise ValueError(f"color counts sum to {sum(m)}, model acts on {M} points")
    if not 0 <= K <= M:
        raise ValueError(f"draw size K={K} outside 0..{M}")
    return m


def hypergeometric_map(model: FiniteMarkovModel, m: Sequence[int], K: int) -> FactorMap:
    """Color counts ``(#{j in color i : x(j) <= K})_i`` on S_M."""
    m = _validate_colors(model, m, K)
    intervals = _color_intervals(m)
    keys = [tuple(sum(1 for j in iv if x[j] <= K) for iv in intervals) for x in model.labels]
    name = f"H(m={tuple(m)},K={K})"
    return _verified(model, factor_map(model, keys, name))


def color_family_maps(
    model: FiniteMarkovModel, m: Sequence[int], K: int, family: Sequence
) -> list:
    """Maps on S_M that see the color counts through a family of color subsets.

    ``family`` holds ``(I, kind)`` with ``I`` a set of colors (1-based);
    ``"restriction"`` keeps ``(k_i)_{i in I}``, ``"image"`` keeps
    ``sum_{i in I} k_i``.  These are the hypergeometric counterparts of
    the coordinate-block maps on the simplex.
    """
    m = _validate_colors(model, m, K)
    intervals = _color_intervals(m)
    counts = [tuple(sum(1 for j in iv if x[j] <= K) for iv in intervals) for x in model.labels]
    maps = []
    for I, kind in family:
        I = _check_index_set(len(m), I)
        if kind == "restriction":
            keys = [tuple(ks[i - 1] for i in I) for ks in counts]
        elif kind == "image":
            keys = [sum(ks[i - 1] for i in I) for ks in counts]
        else:
            raise ValueError(f"unknown kind {kind!r}")
        name = f"{kind}{{{','.join(map(str, I))}}}"
        maps.append(_verified(model, factor_map(model, keys, name)))
    return maps


# ------------------------------------------------------------------ products


def product_model(components: Sequence) -> FiniteMarkovModel:
    """Resample one uniformly chosen coordinate from its marginal.

    ``components`` lists the marginals ``nu_j`` (sequences of positive
    probabilities), or ``(size, nu_j)`` pairs.
    """
    measures = []
    for comp in components:
        if isinstance(comp, tuple) and len(comp) == 2 and isinstance(comp[0], int):
            size, nu = comp
            nu = [to_fraction(v) for v in nu]
            if len(nu) != size:
                raise ModelError(f"component size {size} does not match its measure")
        else:
            nu = [to_fraction(v) for v in comp]
        if any(v <= 0 for v in nu):
            raise ModelError("component measures must charge every point")
        if sum(nu) != 1:
            raise ModelError("component measure does not sum to 1")
        measures.append(nu)
    ZooSpec("product", {"measures": measures})
    n = len(measures)
    states = list(product(*(range(len(nu)) for nu in measures)))
    index = {s: i for i, s in enumerate(states)}
    rows = []
    mu = []
    for x in states:
        row: dict = {}
        for j, nu in enumerate(measures):
            for v, p in enumerate(nu):
                y = x[:j] + (v,) + x[j + 1:]
                row[index[y]] = row.get(index[y], 0) + p / n
        rows.append(row)
        mu.append(math.prod((nu[v] for nu, v in zip(measures, x)), start=Fraction(1)))
    return build_model(states, rows, mu)


def projection_map(model: FiniteMarkovModel, S: Sequence[int]) -> FactorMap:
    """``T_S(x) = (x_j)_{j in S}`` for a product model; ``S`` is 1-based."""
    S = _check_index_set(len(model.labels[0]), S)
    keys = [tuple(x[j - 1] for j in S) for x in model.labels]
    return _verified(model, factor_map(model, keys, "P_{" + ",".join(map(str, S)) + "}"))


# -------------------------------------------------------------- Cayley walks


def cyclic_group_table(n: int) -> list:
    return [[(a + b) % n for b in range(n)] for a in range(n)]


def _group_identity(table: Sequence[Sequence[int]]) -> int:
    n = len(table)
    for e in range(n):
        if all(table[e][a] == a and table[a][e] == a for a in range(n)):
            return e
    raise ModelError("group table has no identity")


def _group_inverse(table, e):
    n = len(table)
    inv = [None] * n
    for a in range(n):
        for b in range(n):
            if table[a][b] == e:
                inv[a] = b
                break
        if inv[a] is None:
            raise ModelError(f"element {a} has no inverse")
    return inv


def cayley_model(
    table: Sequence[Sequence[int]],
    generators: Sequence[int],
    homomorphisms: Sequence = (),
) -> tuple:
    """Left-invariant walk ``K(x, y) = |S|^{-1} 1_S(y^{-1} x)`` on a finite group.

    ``homomorphisms`` holds ``(name, images, target_table)``; each is
    checked exhaustively and turned into a factor map.  Returns
    ``(model, maps, generator_sets)`` where ``generator_sets[s]`` lists the
    maps whose kernel misses the generator ``s``.
    """
    n = len(table)
    if any(len(row) != n for row in table):
        raise ModelError("group table must be square")
    e = _group_identity(table)
    inv = _group_inverse(table, e)
    S = sorted(set(int(s) for s in generators))
    if not S:
        raise ModelError("empty generating set")
    w = Fraction(1, len(S))
    rows = []
    for x in range(n):
        row: dict = {}
        for s in S:
            y = table[x][inv[s]]  # y^{-1} x = s
            row[y] = row.get(y, 0) + w
        rows.append(row)
    model = build_model(list(range(n)), rows, [Fraction(1, n)] * n)
    if not model.irreducible:
        raise ModelError("generators do not generate the group (kernel is reducible)")
    maps = []
    gen_sets = {s: [] for s in S}
    for i, (name, images, target) in enumerate(homomorphisms):
        images = [int(v) for v in images]
        if len(images) != n:
            raise ModelError(f"homomorphism {name!r} must give one image per element")
        for a in range(n):
            for b in range(n):
                if images[table[a][b]] != target[images[a]][images[b]]:
                    raise ModelError(f"{name!r} is not a homomorphism at ({a}, {b})")
        tmap = _verified(model, factor_map(model, images, name))
        maps.append(tmap)
        te = _group_identity(target)
        for s in S:
            if images[s] != te:
                gen_sets[s].append(i)
    return model, maps, {s: tuple(v) for s, v in gen_sets.items()}


def cyclic_model(n: int, generators: Sequence[int], moduli: Sequence[int] = ()) -> tuple:
    """Walk on Z_n with reduction maps ``Z_n -> Z_d`` for each ``d`` dividing ``n``."""
    homs = []
    for d in moduli:
        if n % d:
            raise ModelError(f"reduction mod {d} is not a homomorphism on Z_{n}")
        homs.append((f"mod{d}", [a % d for a in range(n)], cyclic_group_table(d)))
    return cayley_model(cyclic_group_table(n), [g % n for g in generators], homs)
