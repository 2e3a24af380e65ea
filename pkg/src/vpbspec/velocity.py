"""Hermite discretization of velocity space.

Functions of ``v`` are represented by coefficient vectors in the tensor
Hermite basis ``phi_k(v) = h_{k1}(v1) h_{k2}(v2) h_{k3}(v3) sqrt(M(v))``
with ``h_n = He_n / sqrt(n!)`` and ``M`` the standard Maxwellian. The basis
is orthonormal in ``L^2(R^3_v)``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels

K_CAP = 12
DEFAULT_K = 8
SQRT2 = np.sqrt(2.0)


class BasisError(ValueError):
    """Invalid basis request (degree out of range or too small)."""


def _graded_indices(K):
    idx = []
    for n in range(K + 1):
        for k1 in range(n, -1, -1):
            for k2 in range(n - k1, -1, -1):
                idx.append((k1, k2, n - k1 - k2))
    return np.array(idx, dtype=np.int_).reshape(-1, 3)


def maxwellian(v):
    """Standard Maxwellian ``(2 pi)^{-3/2} exp(-|v|^2/2)`` at points ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    return (2 * np.pi) ** -1.5 * np.exp(-0.5 * np.sum(v * v, axis=-1))


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    """Orthonormal tensor Hermite basis of total degree ``<= K``.

    :param K: maximal total degree.
    :param index_map: ``(dimension, 3)`` multi-indices in graded
        lexicographic order (first component descending within a degree).
    :param nodes: tensor Gauss-Hermite nodes, shape ``(N, 3)``.
    :param gauss_weights: probability weights for the Maxwellian measure.
    """

    K: int
    index_map: np.ndarray
    nodes: np.ndarray
    gauss_weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def max_total_degree(self):
        return self.K

    @property
    def dimension(self):
        return self.index_map.shape[0]

    @property
    def degrees(self):
        return self.index_map.sum(axis=1)

    @property
    def folded_weights(self):
        """Weights ``w_q / M(x_q)`` so that ``sum W f g`` equals ``int f g dv``."""
        return self.gauss_weights / maxwellian(self.nodes)

    @cached_property
    def node_polys(self):
        """Polynomial parts ``H_k`` of every basis function at the nodes, ``(N, dim)``."""
        return kernels.tensor_hermite(self.nodes, self.K, self.index_map)

    def index_of(self, k):
        """Position of the multi-index ``k`` in the basis ordering."""
        key = tuple(int(x) for x in k)
        lookup = self._cache.get("lookup")
        if lookup is None:
            lookup = {tuple(int(x) for x in row): i for i, row in enumerate(self.index_map)}
            self._cache["lookup"] = lookup
        return lookup[key]

    def polys(self, points):
        """Polynomial parts of the basis at arbitrary points ``(N, 3)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return kernels.tensor_hermite(pts, self.K, self.index_map)

    def evaluate(self, coeffs, points):
        """Evaluate ``f(v) = sum_k c_k phi_k(v)`` at ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (self.polys(pts) @ np.asarray(coeffs)) * np.sqrt(maxwellian(pts))

    def project_polynomial(self, poly):
        """Coefficients of ``p(v) sqrt(M)`` for a callable ``p`` on ``(N, 3)`` points.

        Exact when ``deg p <= K + 3``.
        """
        vals = np.asarray(poly(self.nodes))
        return self.node_polys.T @ (self.gauss_weights * vals)

    def gram(self):
        """Gram matrix of the basis computed with the stored quadrature."""
        P = self.node_polys
        return P.T @ (self.gauss_weights[:, None] * P)

    @cached_property
    def chi(self):
        """Coefficients of the collision invariants ``chi_0..chi_4``, shape ``(5, dim)``."""
        if self.K < 2:
            raise BasisError("chi_4 requires K >= 2")
        c = np.zeros((5, self.dimension))
        c[0, 0] = 1.0
        for j in range(3):
            c[j + 1, j + 1] = 1.0
            e = [0, 0, 0]
            e[j] = 2
            c[4, self.index_of(e)] = 1.0 / np.sqrt(3.0)
        return c


def build_basis(K=DEFAULT_K, cap=K_CAP):
    """Build the orthonormal Hermite basis of total degree ``<= K``.

    :param K: maximal total degree, ``0 <= K <= cap``.
    :param cap: resource guard on ``K``.
    """
    if not isinstance(K, (int, np.integer)) or K < 0:
        raise BasisError(f"K must be a nonnegative integer, got {K!r}")
    if K > cap:
        raise BasisError(f"K={K} exceeds the configured cap {cap}")
    n = K + 2
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / np.sqrt(2 * np.pi)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return HermiteBasis(int(K), _graded_indices(int(K)), X, W)


def _check_unit(omega):
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,) or abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit 3-vector")
    return omega


def coordinate_multiplication(basis, axis):
    """Matrix of multiplication by ``v_axis`` from the three-term recurrence."""
    cache = basis._cache.setdefault("vmul", {})
    if axis in cache:
        return cache[axis]
    dim = basis.dimension
    V = np.zeros((dim, dim))
    for a, k in enumerate(basis.index_map):
        n = k[axis]
        up = k.copy()
        up[axis] += 1
        if up.sum() <= basis.K:
            b = basis.index_of(up)
            V[b, a] = V[a, b] = np.sqrt(n + 1.0)
    V.setflags(write=False)
    cache[axis] = V
    return V


def multiplication_matrix(basis, omega):
    """Real symmetric Galerkin matrix of multiplication by ``v . omega``."""
    omega = _check_unit(omega)
    return sum(omega[i] * coordinate_multiplication(basis, i) for i in range(3))


def rotation_generator(basis, axis):
    """Antisymmetric matrix of the angular-momentum generator about ``axis``.

    For ``axis = 2`` this is ``v1 d/dv2 - v2 d/dv1``; it preserves the total
    degree, so it acts exactly on the truncated basis.
    """
    cache = basis._cache.setdefault("rotgen", {})
    if axis in cache:
        return cache[axis]
    p, q = [(1, 2), (2, 0), (0, 1)][axis]
    dim = basis.dimension
    J = np.zeros((dim, dim))
    for c, k in enumerate(basis.index_map):
        a, b = k[p], k[q]
        if b > 0:
            t = k.copy()
            t[p] += 1
            t[q] -= 1
            J[basis.index_of(t), c] += np.sqrt(b * (a + 1.0))
        if a > 0:
            t = k.copy()
            t[p] -= 1
            t[q] += 1
            J[basis.index_of(t), c] -= np.sqrt(a * (b + 1.0))
    cache[axis] = J
    return J


def rotation_representation(basis, O):
    """Matrix of ``f(v) -> f(O^T v)`` in the basis (orthogonal, degree preserving)."""
    O = np.asarray(O, dtype=float)
    if O.shape != (3, 3) or np.linalg.norm(O @ O.T - np.eye(3)) > 1e-12:
        raise ValueError("O must be an orthogonal 3x3 matrix")
    rotated = basis.polys(basis.nodes @ O)  # rows x_q^T O = (O^T x_q)^T
    return basis.node_polys.T @ (basis.gauss_weights[:, None] * rotated)


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """Orthogonal projections onto the fluid space and its complement."""

    P0: np.ndarray
    P1: np.ndarray
    Pd: np.ndarray
    U1: np.ndarray  # orthonormal basis of range(P1), shape (dim, dim - 5)


def projections(basis):
    """Build ``P0``, ``P1 = I - P0`` and ``Pd`` for ``basis`` (requires ``K >= 2``)."""
    if basis.K < 2:
        raise BasisError("projections need K >= 2 so that chi_4 is representable")
    cached = basis._cache.get("proj")
    if cached is not None:
        return cached
    C = basis.chi
    P0 = C.T @ C
    P1 = np.eye(basis.dimension) - P0
    Pd = np.outer(C[0], C[0])
    q, _ = np.linalg.qr(np.hstack([C.T, np.eye(basis.dimension)]))
    U1 = q[:, 5:basis.dimension]
    for arr in (P0, P1, Pd, U1):
        arr.setflags(write=False)
    proj = ProjectionSet(P0, P1, Pd, U1)
    basis._cache["proj"] = proj
    return proj


@dataclass(frozen=True)
class WeightedMetric:
    """Inner product ``(f, g)_xi = (f, g) + w f_0 conj(g_0)`` with ``w = 1/(eps^2 s^2)``."""

    s: float
    eps: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def weight(self):
        return 1.0 / (self.eps * self.s) ** 2

    def gram(self, dim):
        G = np.eye(dim)
        G[0, 0] += self.weight
        return G

    def inner(self, f, g):
        f = np.asarray(f)
        g = np.asarray(g)
        return np.vdot(g, f) + self.weight * f[0] * np.conj(g[0])

    def bilinear(self, f, g):
        """``(f, conj g)_xi``, the pairing used for eigenfunction normalization."""
        f = np.asarray(f)
        g = np.asarray(g)
        return np.dot(g, f) + self.weight * f[0] * g[0]

    def norm(self, f):
        return float(np.sqrt(np.real(self.inner(f, f))))


def weighted_inner(f, g, s, eps=1.0):
    """``(f, g) + (eps s)^-2 (Pd f, Pd g)``, conjugating the second argument."""
    if not s > 0:
        raise ValueError("s must be positive")
    return WeightedMetric(float(s), float(eps)).inner(f, g)
