"""Decompositions of the identity on R^n and on so(n), and sphere quadrature.

so(n) is coordinatized by the orthonormal basis ``(e_i e_j^T - e_j e_i^T) / sqrt 2``
for ``i < j`` so that projectors induced on it are plain symmetric matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Any, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as P

from .bl import as_exponents

__all__ = [
    "PSD_TOL",
    "PremiseError",
    "jacobi_eigenvalues",
    "SubspaceSpec",
    "random_subspace",
    "random_tight_frame",
    "psd_decomposition_check",
    "so_pairs",
    "so_coords",
    "so_matrix",
    "random_antisymmetric",
    "lie_projection",
    "norm_identity_residual",
    "induced_projector",
    "lie_operator",
    "lie_lift_check",
    "coordinate_family_lambda",
    "SphereResult",
    "sphere_quadrature_check",
]

PSD_TOL = 1e-10


class PremiseError(ValueError):
    pass


def jacobi_eigenvalues(A: Any, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||A||_F)``.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, float(np.abs(a).max(initial=0.0)))):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    scale = max(1.0, float(np.linalg.norm(a)))
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # summing off-diagonal squares directly avoids cancellation against the diagonal
        off = float(np.sqrt(np.sum(a[offdiag] ** 2)))
        if off < tol * scale:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                rp, rq = a[p].copy(), a[q].copy()
                a[p], a[q] = cs * rp - sn * rq, sn * rp + cs * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = cs * cp - sn * cq, sn * cp + cs * cq
                a[p, q] = a[q, p] = 0.0
    raise RuntimeError("Jacobi iteration did not converge")


@dataclass(frozen=True, eq=False)
class SubspaceSpec:
    """Subspace ``E`` of R^n with orthonormal ``basis`` columns and a subgroup kind.

    ``kind="fix"`` pairs ``E`` with the rotations fixing it pointwise,
    ``kind="stab"`` with those mapping it onto itself.
    """

    n: int
    basis: np.ndarray
    kind: str = "fix"

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.shape[0] != self.n:
            raise ValueError(f"basis vectors must live in R^{self.n}")
        if self.kind not in ("fix", "stab"):
            raise ValueError(f"unknown kind {self.kind!r}")
        gram = b.T @ b
        if np.max(np.abs(gram - np.eye(b.shape[1])), initial=0.0) > 1e-12:
            raise ValueError("basis is not orthonormal")
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_indices(cls, n: int, I: Sequence[int], kind: str = "fix") -> "SubspaceSpec":
        """Coordinate subspace ``span(e_i : i in I)`` with 1-based ``I``."""
        I = sorted(set(int(i) for i in I))
        if any(i < 1 or i > n for i in I):
            raise ValueError(f"indices must lie in 1..{n}")
        return cls(n, np.eye(n)[:, [i - 1 for i in I]], kind)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


def random_subspace(n: int, k: int, rng: np.random.Generator, kind: str = "fix") -> SubspaceSpec:
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    # re-orthonormalize to push the Gram residual well below 1e-12
    q, _ = np.linalg.qr(q)
    return SubspaceSpec(n, q, kind)


def random_tight_frame(n: int, m: int, rng: np.random.Generator) -> tuple:
    """Unit vectors ``u_1..u_m`` and weights ``c`` with ``sum c_i u_i u_i^T = Id``."""
    if m < n:
        raise ValueError("a frame of R^n needs at least n vectors")
    M = rng.standard_normal((n, m))
    # polar factor: rows of F are orthonormal, so sum f_i f_i^T = F F^T = Id
    U, _, Wt = np.linalg.svd(M, full_matrices=False)
    F = U @ Wt
    norms = np.linalg.norm(F, axis=0)
    return F / norms, norms**2


def _subspaces(subspaces: Sequence) -> list:
    out = [s if isinstance(s, SubspaceSpec) else None for s in subspaces]
    if any(s is None for s in out):
        raise TypeError("expected SubspaceSpec instances")
    if len({s.n for s in out}) > 1:
        raise ValueError("all subspaces must live in the same R^n")
    return out


def _weights(c: Any, m: int) -> np.ndarray:
    if isinstance(c, np.ndarray):
        cf = c.astype(float)
        if cf.shape != (m,):
            raise ValueError(f"need {m} coefficients")
        if np.any(cf < 0):
            raise ValueError("coefficients must be nonnegative")
        return cf
    # rational strings, fractions and scalar broadcast; values above 1 are allowed here
    return np.array([float(v) for v in as_exponents(c, m, bounded=False)])


def psd_decomposition_check(subspaces: Sequence[SubspaceSpec], c: Any) -> float:
    """``lambda_min(Id - sum c_i P_{E_i})``; the decomposition holds iff this is ``>= -PSD_TOL``."""
    specs = _subspaces(subspaces)
    if not specs:
        raise ValueError("need at least one subspace")
    cf = _weights(c, len(specs))
    n = specs[0].n
    S = sum(ci * s.projector for ci, s in zip(cf, specs))
    return float(jacobi_eigenvalues(np.eye(n) - S)[0])


# ------------------------------------------------------------------- so(n)


def so_pairs(n: int) -> list:
    return list(combinations(range(n), 2))


def so_coords(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    iu = np.triu_indices(n, 1)
    return math.sqrt(2.0) * A[iu]


def so_matrix(v: np.ndarray, n: int) -> np.ndarray:
    A = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    A[iu] = np.asarray(v) / math.sqrt(2.0)
    return A - A.T


def random_antisymmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return G - G.T


def _check_antisymmetric(A: Any, n: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (n, n):
        raise ValueError(f"expected an {n}x{n} matrix")
    if np.max(np.abs(A + A.T), initial=0.0) > 1e-12 * max(1.0, float(np.abs(A).max(initial=0.0))):
        raise ValueError("matrix is not antisymmetric")
    return A


def lie_projection(spec: SubspaceSpec, A: Any) -> np.ndarray:
    """Orthogonal projection of ``A`` onto the complement of the subgroup's Lie algebra.

    ``PA + AP - PAP`` for ``fix`` and ``PA + AP - 2PAP`` for ``stab``.
    """
    A = _check_antisymmetric(A, spec.n)
    Pm = spec.projector
    PAP = Pm @ A @ Pm
    return Pm @ A + A @ Pm - (1.0 if spec.kind == "fix" else 2.0) * PAP


def norm_identity_residual(spec: SubspaceSpec, A: Any) -> float:
    """``| ||P_E(A)||^2 - (2||PA||^2 - lam ||PAP||^2) |`` with ``lam = 1`` (fix) or 2 (stab)."""
    A = _check_antisymmetric(A, spec.n)
    Pm = spec.projector
    lam = 1.0 if spec.kind == "fix" else 2.0
    lhs = float(np.sum(lie_projection(spec, A) ** 2))
    rhs = 2.0 * float(np.sum((Pm @ A) ** 2)) - lam * float(np.sum((Pm @ A @ Pm) ** 2))
    return abs(lhs - rhs)


def induced_projector(spec: SubspaceSpec, check: bool = True) -> np.ndarray:
    """Matrix of ``lie_projection(spec, .)`` in the so(n) coordinates."""
    n = spec.n
    N = n * (n - 1) // 2
    Q = np.empty((N, N))
    for k in range(N):
        e = np.zeros(N)
        e[k] = 1.0
        Q[:, k] = so_coords(lie_projection(spec, so_matrix(e, n)))
    if check:
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10:
            raise AssertionError("induced projector is not self-adjoint")
        if np.max(np.abs(Q @ Q - Q), initial=0.0) > 1e-10:
            raise AssertionError("induced projector is not idempotent")
    return Q


def lie_operator(subspaces: Sequence[SubspaceSpec], c: Any) -> np.ndarray:
    """``sum c_i P_{E_i}`` on so(n), one induced projector per subspace."""
    specs = _subspaces(subspaces)
    cf = _weights(c, len(specs))
    n = specs[0].n
    N = n * (n - 1) // 2
    return sum((ci * induced_projector(s) for ci, s in zip(cf, specs)), np.zeros((N, N)))


def lie_lift_check(subspaces: Sequence[SubspaceSpec], c: Any) -> float:
    """``lambda_min(Id - sum (c_i / 2) P_{E_i})`` on so(n).

    Raises ``PremiseError`` unless ``sum c_i P_{E_i} <= Id`` on R^n.
    """
    specs = _subspaces(subspaces)
    cf = _weights(c, len(specs))
    premise = psd_decomposition_check(specs, cf)
    if premise < -PSD_TOL:
        raise PremiseError(f"sum c_i P_E_i exceeds Id on R^n (lambda_min = {premise:.3e})")
    n = specs[0].n
    if n < 2:
        raise ValueError("so(n) is trivial for n < 2")
    N = n * (n - 1) // 2
    return float(jacobi_eigenvalues(np.eye(N) - lie_operator(specs, cf / 2.0))[0])


def coordinate_family_lambda(n: int, family: Sequence) -> float:
    """``lambda_min(Id - sum c_I P_{E_I})`` on so(n) for coordinate subspaces.

    ``family`` holds ``(I, kind, c_I)`` with 1-based ``I`` and kind
    ``restriction`` (fix) or ``image`` (stab), as for the pair test.
    """
    specs, cs = [], []
    for I, kind, cI in family:
        k = {"restriction": "fix", "image": "stab", "fix": "fix", "stab": "stab"}[kind]
        specs.append(SubspaceSpec.from_indices(n, I, k))
        cs.append(float(as_exponents([cI], 1, bounded=False)[0]))
    N = n * (n - 1) // 2
    return float(jacobi_eigenvalues(np.eye(N) - lie_operator(specs, np.array(cs)))[0])


# ------------------------------------------------------- sphere quadrature


class SphereResult(NamedTuple):
    lhs: float
    rhs: float
    gap: float


_CIRCLE_POINTS = 4096
_GL_POINTS = 64
_AZIMUTH_POINTS = 128
_MAX_DEGREE = 20


def _check_poly(coeffs: Sequence[float]) -> np.ndarray:
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("polynomial must be a nonempty coefficient list")
    if a.size - 1 > _MAX_DEGREE:
        raise ValueError(f"polynomial degree exceeds {_MAX_DEGREE}")
    grid = np.cos(np.linspace(0.0, math.pi, 4001))
    if np.min(P.polyval(grid, a)) < -1e-12 * max(1.0, float(np.abs(a).sum())):
        raise ValueError("polynomial is negative somewhere on [-1, 1]")
    return a


def _power(values: np.ndarray, p: float) -> np.ndarray:
    return np.maximum(values, 0.0) ** p


def sphere_quadrature_check(n: int, polys: Sequence[Sequence[float]], c: Any = "1/2") -> SphereResult:
    """Both sides of ``int prod f_i(x_i) dsigma <= prod (int f_i(x_i)^{1/c_i} dsigma)^{c_i}``.

    ``polys[i]`` is the ascending coefficient list of ``f_i`` on ``[-1, 1]``.
    The circle uses a 4096-point trapezoid rule, the sphere S^2 a
    Gauss-Legendre rule in the height ``x_3`` and a trapezoid rule in the
    azimuth; both are exact for polynomial integrands of the sizes allowed
    here when ``1 / c_i`` is an integer.
    """
    if n not in (2, 3):
        raise ValueError("sphere quadrature supports n = 2 or 3")
    if len(polys) != n:
        raise ValueError(f"need one polynomial per coordinate ({n})")
    cf = _weights(c, n)
    if np.any(cf <= 0):
        raise ValueError("exponents must be positive")
    fs = [_check_poly(p) for p in polys]
    if n == 2:
        theta = 2.0 * math.pi * np.arange(_CIRCLE_POINTS) / _CIRCLE_POINTS
        coords = [np.cos(theta), np.sin(theta)]
        lhs = float(np.mean(np.prod([P.polyval(x, f) for x, f in zip(coords, fs)], axis=0)))
        # every coordinate of the uniform circle point has the law of cos(theta)
        rhs = math.prod(
            float(np.mean(_power(P.polyval(coords[0], f), 1.0 / ci))) ** ci for f, ci in zip(fs, cf)
        )
    else:
        u, w = legendre.leggauss(_GL_POINTS)
        phi = 2.0 * math.pi * np.arange(_AZIMUTH_POINTS) / _AZIMUTH_POINTS
        r = np.sqrt(1.0 - u**2)[:, None]
        x1, x2 = r * np.cos(phi), r * np.sin(phi)
        x3 = np.broadcast_to(u[:, None], x1.shape)
        integrand = P.polyval(x1, fs[0]) * P.polyval(x2, fs[1]) * P.polyval(x3, fs[2])
        # dsigma = du dphi / (4 pi)
        lhs = float(w @ integrand.mean(axis=1)) / 2.0
        # each coordinate is uniform on [-1, 1]
        rhs = math.prod(
            (float(w @ _power(P.polyval(u, f), 1.0 / ci)) / 2.0) ** ci for f, ci in zip(fs, cf)
        )
    if lhs <= 0:
        gap = math.inf
    elif rhs <= 0:
        gap = -math.inf
    else:
        gap = math.log(rhs) - math.log(lhs)
    return SphereResult(float(lhs), float(rhs), float(gap))
