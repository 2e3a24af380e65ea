"""Fourier symbols of the linearized generators and their resolvents.

``B(xi) = L - i s V_w - (i / (eps^2 s)) V_w Pd`` for the Vlasov-Poisson-Boltzmann
system, ``E(xi) = L - i s V_w`` for the Boltzmann equation, with
``xi = s w`` and ``V_w`` the matrix of multiplication by ``v . w``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .collision import ConditioningError
from .velocity import WeightedMetric, multiplication_matrix, projections

E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True, eq=False)
class SymbolMatrix:
    """Dense complex symbol at ``xi = s omega``.

    :param variant: ``"vpb"`` or ``"boltzmann"``.
    :param metric: :class:`WeightedMetric` (``None`` for Boltzmann).
    """

    matrix: np.ndarray
    s: float
    omega: np.ndarray
    variant: str
    eps: float
    metric: object
    L: object

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def gram_sqrt(self):
        """Diagonal of ``G^{1/2}`` (ones for the Boltzmann variant)."""
        d = np.ones(self.dimension)
        if self.metric is not None:
            d[0] = np.sqrt(1.0 + self.metric.weight)
        return d

    def symmetrized(self):
        """``G^{1/2} B G^{-1/2} = L - i H`` with ``H`` real symmetric."""
        g = self.gram_sqrt
        return (g[:, None] * self.matrix) / g[None, :]

    def eigvals(self):
        return linalg.eigvals(self.symmetrized(), check_finite=False)

    def eig(self):
        """Eigenvalues and eigenvectors in the original coordinates."""
        w, X = linalg.eig(self.symmetrized(), check_finite=False)
        return w, X / self.gram_sqrt[:, None]


def assemble_B(L, s, omega=E1, eps=1.0):
    """VPB symbol; the metric weight is ``1/(eps s)^2`` (``s^-2`` at ``eps = 1``)."""
    s = float(s)
    if s == 0:
        raise ValueError("the VPB symbol is singular at xi = 0")
    if not eps > 0:
        raise ValueError("eps must be positive")
    sa = abs(s)
    omega = np.asarray(omega, dtype=float) * np.sign(s)
    V = multiplication_matrix(L.basis, omega)
    M = L.matrix - 1j * sa * V
    M[:, 0] += -1j / (eps ** 2 * sa) * V[:, 0]
    return SymbolMatrix(M, sa, omega, "vpb", float(eps), WeightedMetric(sa, float(eps)), L)


def assemble_E(L, s, omega=E1):
    """Boltzmann symbol ``L - i s V_omega`` (``s = 0`` gives ``L``)."""
    s = float(s)
    V = multiplication_matrix(L.basis, np.asarray(omega, dtype=float))
    return SymbolMatrix(L.matrix - 1j * s * V, abs(s), np.asarray(omega, float),
                        "boltzmann", np.inf, None, L)


def assemble_symbol(L, s, variant="vpb", eps=1.0, omega=E1):
    if variant == "vpb":
        return assemble_B(L, s, omega, eps)
    if variant == "boltzmann":
        return assemble_E(L, s, omega)
    raise ValueError(f"unknown symbol variant {variant!r}")


def acoustic_eigenvalues(s, eps=1.0):
    """Closed-form eigenvalues ``0, 0, 0, +-i sqrt(1/eps^2 + 5 s^2/3)`` of ``A(xi)``."""
    r = np.sqrt(1.0 / eps ** 2 + 5.0 * s * s / 3.0)
    return np.array([-1j * r, 0, 0, 0, 1j * r])


def assemble_A(s, eps=1.0):
    """5x5 matrix of ``A(s e1)`` in the basis ``chi_0..chi_4``."""
    if not s > 0:
        raise ValueError("s must be positive")
    c = np.sqrt(2.0 / 3.0)
    A = np.zeros((5, 5), dtype=complex)
    A[0, 1] = -1j * s
    A[1, 0] = -1j * (s + 1.0 / (eps ** 2 * s))
    A[1, 4] = A[4, 1] = -1j * c * s
    return A


def acoustic_gram(s, eps=1.0):
    G = np.eye(5)
    G[0, 0] += 1.0 / (eps * s) ** 2
    return G


def micro_symbol(L, s):
    """``Q(s e1) = U1^T (L - i s V) U1`` on range(P1)."""
    return _micro_parts(L)[0] - 1j * float(s) * _micro_parts(L)[1]


@lru_cache(maxsize=16)
def _micro_parts(L):
    U1 = projections(L.basis).U1
    V = multiplication_matrix(L.basis, E1)
    return U1.T @ L.matrix @ U1, U1.T @ V @ U1


class Resolvent:
    """Factorized ``R(lam, s) = [L - lam P1 - i s P1 V P1]^{-1}`` on range(P1)."""

    def __init__(self, L, lam, s, cond_max=1e12):
        lam = complex(lam)
        if lam != 0 and not lam.real > -L.mu:
            raise ConditioningError("Re lambda must exceed -mu")
        self.L = L
        self.lam = lam
        self.s = float(s)
        Q = micro_symbol(L, s)
        A = Q - lam * np.eye(Q.shape[0])
        self._lu = linalg.lu_factor(A, check_finite=False)
        d = np.abs(np.diag(self._lu[0]))
        if d.min() <= d.max() / cond_max:
            raise ConditioningError("resolvent is numerically singular")
        self._U1 = projections(L.basis).U1

    def solve_micro_coords(self, y):
        return linalg.lu_solve(self._lu, y, check_finite=False)

    def __call__(self, rhs):
        rhs = np.asarray(rhs)
        macro = self.L.basis.chi @ rhs
        if np.linalg.norm(macro) > 1e-10 * max(1.0, np.linalg.norm(rhs)):
            raise ValueError("right-hand side has a macroscopic component")
        return self._U1 @ self.solve_micro_coords(self._U1.T @ rhs)


def resolvent_R(L, lam, s, rhs):
    """Apply ``R(lam, s e1)`` to ``rhs`` in range(P1)."""
    return Resolvent(L, lam, s)(rhs)


def spectral_gap_scan(L, s_grid, eps=1.0, delta=None, variant="vpb"):
    """Largest real part per ``s`` among eigenvalues with ``Re > -mu + delta``.

    :returns: list of dicts with ``s``, ``max_re`` (``nan`` if none qualify or
        the eigensolve failed), ``max_re_all`` and ``error``.
    """
    delta = 0.05 * L.mu if delta is None else delta
    out = []
    for s in s_grid:
        row = {"s": float(s), "max_re": np.nan, "max_re_all": np.nan, "error": ""}
        try:
            w = assemble_symbol(L, s, variant, eps).eigvals()
            row["max_re_all"] = float(w.real.max())
            sel = w.real[w.real > -L.mu + delta]
            row["max_re"] = float(sel.max()) if sel.size else np.nan
            row["count"] = int(sel.size)
        except (linalg.LinAlgError, ValueError) as exc:  # pragma: no cover
            row["error"] = str(exc)
        out.append(row)
    return out


__all__ = [
    "SymbolMatrix", "Resolvent", "assemble_B", "assemble_E", "assemble_A", "assemble_symbol",
    "acoustic_eigenvalues", "acoustic_gram", "micro_symbol", "resolvent_R",
    "spectral_gap_scan", "E1",
]
