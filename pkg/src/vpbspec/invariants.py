"""Structural invariants of the collision matrix and the symbols.

Each check returns ``(value, tolerance)`` so callers can report margins.
"""
import numpy as np
from scipy import linalg

from .collision import model_tolerance
from .symbols import acoustic_gram, assemble_A, assemble_B
from .velocity import multiplication_matrix, projections, rotation_representation

CHECK_FREQUENCIES = (0.01, 0.1, 0.5, 1.0, 5.0)
SPECTRUM_TOL = 1e-9


def null_space(L):
    """``max_j ||L chi_j||``."""
    return float(np.max(np.linalg.norm(L.matrix @ L.basis.chi.T, axis=0))), model_tolerance(L)


def coercivity(L):
    """Violation of ``-(L f, f) >= mu ||P1 f||^2`` on range(P1), relative to ``mu``.

    The reported value is ``max(0, mu - lambda_min(-L|_{P1}))/mu`` together with
    the nonpositivity defect of ``L`` itself.
    """
    lam = linalg.eigvalsh(-L.micro)
    full = linalg.eigvalsh(L.matrix)
    val = max(0.0, (L.mu - lam.min()) / L.mu, float(full.max()))
    return float(val), model_tolerance(L)


def _wgram(s, dim, eps=1.0):
    g = np.ones(dim)
    g[0] += 1.0 / (eps * s) ** 2
    return g


def acoustic_self_adjoint(s, eps=1.0):
    """``||G (iA) - (G (iA))^H||`` for the 5x5 fluid block."""
    G = acoustic_gram(s, eps)
    M = G @ (1j * assemble_A(s, eps))
    return float(np.linalg.norm(M - M.conj().T)), 1e-12


def adjoint_identity(L, s, eps=1.0, omega=(1.0, 0.0, 0.0)):
    """``||G^{-1} B(xi)^H G - B(-xi)|| / ||B(xi)||`` (weighted adjoint)."""
    Bp = assemble_B(L, s, omega, eps).matrix
    Bm = assemble_B(L, -s, omega, eps).matrix
    g = _wgram(abs(s), Bp.shape[0], eps)
    adj = (Bp.conj().T * g[None, :]) / g[:, None]
    return float(np.linalg.norm(adj - Bm) / np.linalg.norm(Bp)), model_tolerance(L)


def _spectrum_distance(a, b):
    """Max nearest-match distance between two spectra, relative to their scale."""
    b = list(b)
    err = 0.0
    for lam in sorted(a, key=lambda z: (z.real, z.imag)):
        k = int(np.argmin([abs(lam - x) for x in b]))
        err = max(err, abs(lam - b.pop(k)))
    return err / max(1.0, float(np.max(np.abs(a))))


def conjugation_symmetry(L, s, eps=1.0):
    """Spectrum of ``B(s e1)`` is closed under complex conjugation."""
    w = assemble_B(L, s, eps=eps).eigvals()
    return _spectrum_distance(w, np.conj(w)), SPECTRUM_TOL


def rotation_invariance(L, s, eps=1.0, n=2, seed=0):
    """Spectra at random directions match the spectrum at ``e1``; also checks
    that the rotation representation commutes with ``L``."""
    rng = np.random.default_rng(seed)
    ref = assemble_B(L, s, eps=eps).eigvals()
    err = 0.0
    for _ in range(n):
        om = rng.standard_normal(3)
        om /= np.linalg.norm(om)
        err = max(err, _spectrum_distance(assemble_B(L, s, om, eps).eigvals(), ref))
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    R = rotation_representation(L.basis, Q)
    comm = np.linalg.norm(R @ L.matrix - L.matrix @ R) / np.linalg.norm(L.matrix)
    return float(max(err, comm)), max(SPECTRUM_TOL, model_tolerance(L))


def weighted_dissipativity(L, s, eps=1.0):
    """``max Re spec(G B + (G B)^H)/2`` normalised by ``||B||`` (must be <= 0)."""
    B = assemble_B(L, s, eps=eps).matrix
    g = _wgram(s, B.shape[0], eps)
    M = g[:, None] * B
    h = linalg.eigvalsh(0.5 * (M + M.conj().T))
    return float(max(0.0, h.max()) / np.linalg.norm(B)), model_tolerance(L)


def multiplication_symmetry(L):
    """``V_omega`` is symmetric for each axis."""
    err = max(np.linalg.norm(V - V.T) for V in
              (multiplication_matrix(L.basis, e) for e in np.eye(3)))
    return float(err), 1e-13


def projector_defect(L):
    P = projections(L.basis)
    err = max(np.linalg.norm(P.P0 @ P.P0 - P.P0), np.linalg.norm(P.P0 + P.P1 - np.eye(L.basis.dimension)))
    return float(err), 1e-12


def run_suite(L, freqs=CHECK_FREQUENCIES, eps=1.0):
    """All checks as rows ``(name, s, value, tolerance, passed)``."""
    rows = []

    def add(name, s, res):
        val, tol = res
        rows.append((name, s, val, tol, bool(val <= tol)))

    add("null_space", np.nan, null_space(L))
    add("coercivity", np.nan, coercivity(L))
    add("multiplication_symmetry", np.nan, multiplication_symmetry(L))
    add("projector", np.nan, projector_defect(L))
    for s in freqs:
        add("acoustic_self_adjoint", s, acoustic_self_adjoint(s, eps))
        add("adjoint_identity", s, adjoint_identity(L, s, eps))
        add("conjugation_symmetry", s, conjugation_symmetry(L, s, eps))
        add("rotation_invariance", s, rotation_invariance(L, s, eps))
        add("weighted_dissipativity", s, weighted_dissipativity(L, s, eps))
    return rows


__all__ = [
    "null_space", "coercivity", "acoustic_self_adjoint", "adjoint_identity",
    "conjugation_symmetry", "rotation_invariance", "weighted_dissipativity",
    "multiplication_symmetry", "projector_defect", "run_suite", "CHECK_FREQUENCIES",
]
