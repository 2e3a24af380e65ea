"""Reduced dispersion functions, branch continuation and eigenfunctions.

Along ``xi = s e1`` the five low-frequency eigenvalues solve either the
scalar equation ``D0(lam, s) = 0`` (the doubly degenerate shear pair
``j = 2, 3``) or ``D(lam, s) = det M(lam, s) = 0`` (``j = -1, 0, 1``).
"""
from dataclasses import dataclass, field

import numpy as np

from .collision import ConditioningError
from .symbols import Resolvent, assemble_symbol
from .velocity import WeightedMetric, coordinate_multiplication, projections

SQ23 = np.sqrt(2.0 / 3.0)
ACOUSTIC = np.sqrt(5.0 / 3.0)


class BranchError(RuntimeError):
    """Root finding or continuation failed."""


@dataclass(frozen=True)
class TransportEntries:
    """``a_ij = (R(lam, s e1) P1(v1 chi_i), v1 chi_j)`` and the shear entry ``a22``."""

    a11: complex
    a14: complex
    a41: complex
    a44: complex
    a22: complex


def _micro_sources(L):
    """``U1^T P1 (v1 chi_i)`` for ``i = 1, 4, 2`` as columns (micro coordinates)."""
    basis = L.basis
    cache = basis._cache.get("disp_sources")
    if cache is not None:
        return cache
    V1 = coordinate_multiplication(basis, 0)
    U1 = projections(basis).U1
    chi = basis.chi
    G = V1 @ chi[[1, 4, 2]].T  # columns v1 chi_1, v1 chi_4, v1 chi_2
    Y = U1.T @ G
    basis._cache["disp_sources"] = Y
    return Y


def transport_entries(L, lam, s):
    """Evaluate the resolvent inner products entering ``M`` and ``D0``."""
    R = Resolvent(L, lam, s)
    Y = _micro_sources(L)
    X = R.solve_micro_coords(Y)
    A = Y.T @ X  # A[j, i] = (R g_i, g_j) with the second slot real
    return TransportEntries(a11=A[0, 0], a14=A[1, 0], a41=A[0, 1], a44=A[1, 1], a22=A[2, 2])


def _poisson(eps, variant):
    if variant == "boltzmann":
        return 0.0
    if variant != "vpb":
        raise ValueError(f"unknown variant {variant!r}")
    return 1.0 / eps ** 2


def m_matrix(lam, s, e, eps=1.0, variant="vpb"):
    """3x3 matrix acting on ``(W0, W . omega, W4)`` (``s != 0``)."""
    k = _poisson(eps, variant)
    return np.array([
        [lam, 1j * s, 0],
        [1j * (s + k / s), lam - s * s * e.a11, 1j * s * SQ23 - s * s * e.a41],
        [0, 1j * s * SQ23 - s * s * e.a14, lam - s * s * e.a44],
    ], dtype=complex)


def det_from_entries(lam, s, e, eps=1.0, variant="vpb"):
    k = _poisson(eps, variant)
    p = (1j * s * SQ23 - s * s * e.a41) * (1j * s * SQ23 - s * s * e.a14)
    return (lam * ((lam - s * s * e.a11) * (lam - s * s * e.a44) - p)
            + (s * s + k) * (lam - s * s * e.a44))


def det_expanded(lam, s, e, eps=1.0, variant="vpb"):
    """Polynomial-in-entries expansion of ``D``, used as a cross-check."""
    k = _poisson(eps, variant)
    s2 = s * s
    return (lam ** 3 - lam ** 2 * s2 * (e.a11 + e.a44)
            + lam * (k + 5.0 / 3.0 * s2 + 1j * SQ23 * s ** 3 * (e.a14 + e.a41)
                     + s2 * s2 * (e.a11 * e.a44 - e.a14 * e.a41))
            - (s2 * k + s2 * s2) * e.a44)


def det_D(L, lam, s, eps=1.0, variant="vpb"):
    """``D(lam, s)``; at ``s = 0`` this is ``lam (lam^2 + 1/eps^2)`` for VPB."""
    return det_from_entries(lam, s, transport_entries(L, lam, s), eps, variant)


def det_D0(L, lam, s):
    """``D0(lam, s) = lam - s^2 a22(lam, s)``."""
    return lam - s * s * transport_entries(L, lam, s).a22


# --------------------------------------------------------------------------
# root finding

def _fd_derivative(f, z, fz=None):
    h = 1e-6 * (1 + abs(z))
    return (f(z + h) - f(z - h)) / (2 * h)


def _muller(f, z0, tol, maxit=60):
    z = [z0 - 1e-3 * (1 + abs(z0)), z0 + 1e-3 * (1 + abs(z0)), z0]
    fz = [f(x) for x in z]
    for _ in range(maxit):
        h1, h2 = z[1] - z[0], z[2] - z[1]
        d1, d2 = (fz[1] - fz[0]) / h1, (fz[2] - fz[1]) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        c = fz[2]
        disc = np.sqrt(b * b - 4 * a * c + 0j)
        den = b + disc if abs(b + disc) > abs(b - disc) else b - disc
        if den == 0:
            break
        dz = -2 * c / den
        znew = z[2] + dz
        z = [z[1], z[2], znew]
        fz = [fz[1], fz[2], f(znew)]
        if abs(dz) <= tol * (1 + abs(znew)):
            return znew, True
    return z[2], False


def find_root(f, z0, tol=1e-14, maxit=50):
    """Complex Newton with a central-difference derivative and Muller fallback.

    :returns: ``(root, converged, method)``.
    """
    z = complex(z0)
    best = z
    fbest = abs(f(z))
    for _ in range(maxit):
        fz = f(z)
        if abs(fz) < fbest:
            best, fbest = z, abs(fz)
        d = _fd_derivative(f, z)
        if d == 0 or not np.isfinite(d):
            break
        dz = -fz / d
        z = z + dz
        if abs(dz) <= tol * (1 + abs(z)):
            return z, True, "newton"
    z, ok = _muller(f, best, tol)
    return z, ok, "muller"


# --------------------------------------------------------------------------
# eigenfunctions

def _phase_fix(psi):
    macro = psi[:5].copy()
    k = int(np.argmax(np.abs(macro)))
    return -psi if macro[k].real < 0 else psi


def _normalize(psi, metric_weight):
    q = np.dot(psi, psi) + metric_weight * psi[0] * psi[0]
    return _phase_fix(psi / np.sqrt(q + 0j))


def build_eigenfunction(L, j, s, lam, eps=1.0, variant="vpb", degeneracy_tol=1e-6):
    """Eigenvector of the symbol at ``s e1`` for branch ``j``.

    Normalized so that ``(psi, conj psi)_xi = 1`` and the largest macroscopic
    coefficient has positive real part.
    """
    basis = L.basis
    chi = basis.chi
    V1 = coordinate_multiplication(basis, 0)
    P1 = projections(basis).P1
    R = Resolvent(L, lam, s)
    if j in (2, 3):
        macro = chi[j].astype(complex)
    elif j in (-1, 0, 1):
        e = transport_entries(L, lam, s)
        M = m_matrix(lam, s, e, eps, variant)
        _, sv, vh = np.linalg.svd(M)
        if sv[1] <= degeneracy_tol * max(sv[0], 1.0):
            raise BranchError(f"null space of M is not one-dimensional at s={s}")
        W0, W1, W4 = np.conj(vh[-1])
        macro = W0 * chi[0] + W1 * chi[1] + W4 * chi[4]
    else:
        raise ValueError("branch index must be one of -1, 0, 1, 2, 3")
    psi = macro + 1j * s * R(P1 @ (V1 @ macro))
    w = 0.0 if variant == "boltzmann" else WeightedMetric(abs(s), eps).weight
    return _normalize(psi, w)


def eigen_residual(L, psi, lam, s, eps=1.0, variant="vpb"):
    B = assemble_symbol(L, s, variant, eps).matrix
    return float(np.linalg.norm(B @ psi - lam * psi) / max(np.linalg.norm(psi), 1e-300))


# --------------------------------------------------------------------------
# branches

@dataclass
class BranchSample:
    s: float
    lam: complex
    psi: np.ndarray
    residual: float
    method: str = "newton"


@dataclass
class Branch:
    """A continued eigenvalue curve ``lambda_j(s)`` with eigenvectors."""

    j: int
    variant: str
    eps: float
    samples: list = field(default_factory=list)
    truncated: str = ""

    @property
    def s(self):
        return np.array([x.s for x in self.samples])

    @property
    def lam(self):
        return np.array([x.lam for x in self.samples])


def branch_origin(j, eps=1.0, variant="vpb"):
    if j in (2, 3) or variant == "boltzmann":
        return 0j
    return 1j * j / eps


def _predict(j, s, prev, eps, variant):
    """Extrapolate the next root quadratically from the latest samples.

    While fewer than three samples exist the branch origin is used as an
    extra node; branches are even in ``s`` except the Boltzmann acoustic
    pair, so the interpolation variable is ``s^2`` or ``s`` respectively.
    """
    acoustic = variant == "boltzmann" and j in (-1, 1)
    base = branch_origin(j, eps, variant)
    if not prev:
        return 1j * j * ACOUSTIC * s if acoustic else base
    if len(prev) >= 3:
        pts = list(prev[-3:])
        x = s
    else:
        pts = [(0.0, base)] + [(xp if acoustic else xp * xp, y) for xp, y in prev]
        x = s if acoustic else s * s
    out = 0j
    for a, (xa, ya) in enumerate(pts):
        w = 1.0
        for b, (xb, _) in enumerate(pts):
            if b != a:
                w *= (x - xb) / (xa - xb)
        out += w * ya
    return out


def _separation(j, s, eps, variant):
    """Rough distance from branch ``j`` to the other roots of the same function."""
    if j in (2, 3):
        return np.inf
    return np.sqrt(_poisson(eps, variant) + ACOUSTIC ** 2 * s * s)


def continue_branch(L, j, s_grid, eps=1.0, variant="vpb", with_vectors=True,
                    residual_tol=1e-12, max_ratio=1.15, max_halvings=40):
    """Newton continuation of branch ``j`` along increasing ``s_grid``.

    Internal sub-steps keep consecutive ``s`` within a factor ``max_ratio``.
    The branch is truncated when Newton fails, the predictor-corrector jump
    exceeds a tenth of the branch separation, or the root leaves
    ``Re lam > -mu/2``.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0) or s_grid[0] <= 0:
        raise ValueError("s_grid must be positive and increasing")
    shear = j in (2, 3)
    br = Branch(j, variant, float(eps))
    prev = []

    def func(s):
        if shear:
            return lambda z: det_D0(L, z, s)
        return lambda z: det_D(L, z, s, eps, variant)

    for s_target in s_grid:
        halvings = 0
        while True:
            s = s_target
            if prev and s_target > max_ratio * prev[-1][0]:
                s = max_ratio * prev[-1][0]
            f = func(s)
            pred = _predict(j, s, prev, eps, variant)
            try:
                lam, ok, method = find_root(f, pred)
            except ConditioningError:
                ok, lam, method = False, pred, "newton"
            jump = abs(lam - pred)
            sep = _separation(j, s, eps, variant)
            if not ok or jump > 0.1 * sep:
                if halvings < max_halvings and prev:
                    max_ratio = 1 + 0.5 * (max_ratio - 1)
                    halvings += 1
                    continue
                br.truncated = f"continuation failed at s={s:.6g} ({method}, jump={jump:.3g})"
                return br
            if lam.real <= -L.mu / 2:
                br.truncated = f"left Re lambda > -mu/2 at s={s:.6g}"
                return br
            res = abs(f(lam))
            if res > residual_tol * max(1.0, abs(lam) ** 3):
                br.truncated = f"residual {res:.3g} above tolerance at s={s:.6g}"
                return br
            prev.append((s, lam))
            if s == s_target:
                break
        psi = build_eigenfunction(L, j, s, lam, eps, variant) if with_vectors else None
        br.samples.append(BranchSample(float(s), complex(lam), psi, float(res), method))
    return br


def continue_all(L, s_grid, eps=1.0, variant="vpb", with_vectors=True):
    """Continue all five branches; ``j = 3`` reuses the ``j = 2`` roots."""
    out = {}
    for j in (-1, 0, 1, 2):
        out[j] = continue_branch(L, j, s_grid, eps, variant, with_vectors)
    b3 = Branch(3, variant, float(eps), truncated=out[2].truncated)
    for smp in out[2].samples:
        psi = build_eigenfunction(L, 3, smp.s, smp.lam, eps, variant) if with_vectors else None
        b3.samples.append(BranchSample(smp.s, smp.lam, psi, smp.residual, smp.method))
    out[3] = b3
    return out


# --------------------------------------------------------------------------
# dense oracle and r0

def dense_branch_eigenvalues(L, s, eps=1.0, variant="vpb"):
    """The five rightmost eigenvalues of the dense symbol, sorted by real part."""
    w = assemble_symbol(L, s, variant, eps).eigvals()
    return w[np.argsort(-w.real)][:5]


def match_dense(lams, dense):
    """Max distance after matching each continued root to its nearest dense eigenvalue."""
    dense = list(dense)
    err = 0.0
    for lam in lams:
        k = int(np.argmin([abs(lam - d) for d in dense]))
        err = max(err, abs(lam - dense.pop(k)))
    return err


def _isolated(L, s, eps, variant):
    w = assemble_symbol(L, s, variant, eps).eigvals()
    w = w[np.argsort(-w.real)]
    top, rest = w[:5], w[5:]
    lo = top.real.min()
    return lo > -L.mu / 2 and rest.real.max() < 2 * lo


def empirical_r0(L, eps=1.0, variant="vpb", s_lo=1e-2, s_hi=10.0, n=48, refine=12):
    """Largest ``s`` at which the five branch eigenvalues stay isolated.

    The five rightmost eigenvalues must satisfy ``Re > -mu/2`` and every
    other eigenvalue must lie below twice their smallest real part.
    """
    grid = np.geomspace(s_lo, s_hi, n)
    last = None
    for s in grid:
        if _isolated(L, s, eps, variant):
            last = s
        else:
            break
    if last is None:
        raise BranchError("branches not isolated even at the smallest s")
    if last == grid[-1]:
        return float(last)
    lo, hi = last, grid[np.searchsorted(grid, last) + 1]
    for _ in range(refine):
        mid = np.sqrt(lo * hi)
        if _isolated(L, mid, eps, variant):
            lo = mid
        else:
            hi = mid
    return float(lo)


def eigenvalue_condition(L, s, lam, eps=1.0, variant="vpb"):
    """Condition number ``||x||^2 / |x^T x|`` of the eigenvalue nearest ``lam``.

    The symmetrized symbol is complex symmetric, so left eigenvectors are
    plain transposes of the right ones; a Jordan block shows up as
    ``x^T x -> 0``. Bounded values indicate a semisimple eigenvalue.
    """
    w, X = np.linalg.eig(assemble_symbol(L, s, variant, eps).symmetrized())
    k = int(np.argmin(np.abs(w - lam)))
    x = X[:, k]
    return float(np.vdot(x, x).real / abs(np.dot(x, x)))


__all__ = [
    "TransportEntries", "Branch", "BranchSample", "BranchError",
    "transport_entries", "m_matrix", "det_D", "det_D0", "det_expanded", "det_from_entries",
    "find_root", "build_eigenfunction", "eigen_residual", "continue_branch", "continue_all",
    "dense_branch_eigenvalues", "match_dense", "empirical_r0", "eigenvalue_condition",
    "branch_origin",
]
