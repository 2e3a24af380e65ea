"""Second-order expansion coefficients and their validation against branches."""
from dataclasses import dataclass, field

import numpy as np

from .collision import solve_micro
from .dispersion import ACOUSTIC, branch_origin, continue_branch
from .symbols import assemble_A
from .velocity import coordinate_multiplication, projections

SQ23 = np.sqrt(2.0 / 3.0)


def _sources(L):
    """``P1(v1 chi_i)`` for ``i = 1, 2, 4`` as coefficient vectors."""
    basis = L.basis
    V1 = coordinate_multiplication(basis, 0)
    P1 = projections(basis).P1
    chi = basis.chi
    return {i: P1 @ (V1 @ chi[i]) for i in (1, 2, 4)}


def _pair(x, g):
    """``(x, g)`` with conjugation on the second slot."""
    return np.vdot(g, x)


@dataclass(frozen=True)
class CoefficientSet:
    """``lambda_{+-1} = +-i + (-a1 +- i b1) s^2``, ``lambda_0 = -a0 s^2``, ``lambda_{2,3} = -a2 s^2``."""

    a0: float
    a1: float
    a2: float
    b1: float
    lambda_second: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoltzmannCoefficientSet:
    """``lambda_{+-1} = +-i sqrt(5/3) s - a_pm1 s^2``, ``lambda_0 = -a0 s^2``, ``lambda_{2,3} = -a2 s^2``."""

    a_pm1: float
    a0: float
    a2: float

    @property
    def lambda_second(self):
        return {-1: -2 * self.a_pm1, 1: -2 * self.a_pm1, 0: -2 * self.a0,
                2: -2 * self.a2, 3: -2 * self.a2}


def lambda_second_formula(L, eps=1.0):
    """``lambda_j''(0)`` from implicit differentiation of ``D`` and ``D0``.

    For ``j = +-1`` this is ``((L -+ (i/eps) P1)^{-1} P1 v1 chi_1, v1 chi_1) +- (5/3) i eps``,
    which reduces to the textbook form at ``eps = 1``.
    """
    g = _sources(L)
    out = {}
    for j in (-1, 1):
        x = solve_micro(L, 1j * j / eps, g[1])
        out[j] = complex(_pair(x, g[1]) + j * 5.0 / 3.0 * 1j * eps)
    out[0] = complex(2 * _pair(solve_micro(L, 0, g[4]), g[4]))
    out[2] = out[3] = complex(2 * _pair(solve_micro(L, 0, g[2]), g[2]))
    return out


def vpb_coefficients(L):
    """``a0, a1, a2, b1`` from their defining resolvent inner products."""
    g = _sources(L)
    y = solve_micro(L, -1j, g[1])  # (L + i P1)^{-1} P1 v1 chi_1
    a1 = -0.5 * _pair(L.matrix @ y, y)
    b1 = 0.5 * (np.vdot(y, y).real + 5.0 / 3.0)
    a0 = -_pair(solve_micro(L, 0, g[4]), g[4])
    a2 = -_pair(solve_micro(L, 0, g[2]), g[2])
    return CoefficientSet(float(np.real(a0)), float(np.real(a1)), float(np.real(a2)),
                          float(b1), lambda_second_formula(L))


def relaxation_closed_forms(mu22, mu31):
    """Exact coefficients for a relaxation operator with rates ``mu22`` on the
    traceless-stress block and ``mu31`` on the heat-flux block (BGK: both ``nu0``).

    :returns: ``(CoefficientSet, BoltzmannCoefficientSet)``.
    """
    a2 = 1.0 / mu22
    a0 = 5.0 / 3.0 / mu31
    a1 = 0.5 * mu22 * (4.0 / 3.0) / (mu22 ** 2 + 1)
    b1 = 0.5 * ((4.0 / 3.0) / (mu22 ** 2 + 1) + 5.0 / 3.0)
    vpb = CoefficientSet(a0, a1, a2, b1)
    boltz = BoltzmannCoefficientSet(1.0 / (3 * mu31) + 2.0 / (3 * mu22), 1.0 / mu31, 1.0 / mu22)
    return vpb, boltz


def boltzmann_coefficients(L):
    """``a_pm1, a0, a2`` for the linearized Boltzmann symbol."""
    g = _sources(L)
    q4 = np.real(_pair(solve_micro(L, 0, g[4]), g[4]))
    q1 = np.real(_pair(solve_micro(L, 0, g[1]), g[1]))
    q2 = np.real(_pair(solve_micro(L, 0, g[2]), g[2]))
    return BoltzmannCoefficientSet(float(-q4 / 5 - q1 / 2), float(-3 * q4 / 5), float(-q2))


# --------------------------------------------------------------------------
# expansion checks

@dataclass
class ExpansionReport:
    """Remainder table ``|lambda_j(s) - leading(s)|`` and its ratio to ``s^2``."""

    j: int
    variant: str
    s: np.ndarray
    remainder: np.ndarray
    ratio: np.ndarray
    monotone: bool
    leading_check: bool
    leading_value: float


def _leading(j, s, coeffs, variant, eps):
    ls = coeffs.lambda_second[j]
    if variant == "boltzmann":
        lin = 1j * j * ACOUSTIC * s if j in (-1, 1) else 0
        return lin + 0.5 * ls * s * s
    return branch_origin(j, eps, variant) + 0.5 * ls * s * s


def validate_expansion(branch, coeffs, eps=1.0, min_samples=3):
    """Compare a continued branch with its second-order expansion.

    ``monotone`` is true when the ratio ``remainder / s^2`` strictly
    decreases as ``s`` decreases. ``leading_check`` tests the leading term:
    ``|lambda_1 - i| <= 2 sqrt(a1^2 + b1^2) s^2`` for VPB and the acoustic slope
    ``|Im lambda_1 / s - sqrt(5/3)|`` at the smallest ``s`` for Boltzmann.
    """
    s = branch.s
    lam = branch.lam
    if s.size < min_samples:
        raise ValueError("insufficient samples for an expansion report")
    order = np.argsort(s)
    s, lam = s[order], lam[order]
    lead = np.array([_leading(branch.j, x, coeffs, branch.variant, eps) for x in s])
    rem = np.abs(lam - lead)
    ratio = rem / s ** 2
    monotone = bool(np.all(np.diff(ratio) > 0))
    j = branch.j
    if branch.variant == "boltzmann" and j in (-1, 1):
        val = float(abs(lam[0].imag / s[0] - j * ACOUSTIC))
        check = val <= 1e-3
    elif branch.variant == "vpb" and j in (-1, 1) and isinstance(coeffs, CoefficientSet):
        bound = 2 * np.hypot(coeffs.a1, coeffs.b1) * s ** 2
        dev = np.abs(lam - branch_origin(j, eps, "vpb"))
        val = float(np.max(dev / bound))
        check = val <= 1.0
    else:
        val, check = float(np.max(ratio)), True
    return ExpansionReport(j, branch.variant, s, rem, ratio, monotone, check, val)


def numerical_second_derivative(L, j, h=1e-3, eps=1.0, variant="vpb"):
    """Richardson-extrapolated ``lambda_j''(0)`` from branch values at ``h`` and ``2h``.

    For the Boltzmann acoustic pair the odd part is removed by averaging the
    ``+j`` and ``-j`` branches, since ``lambda_j(-s) = lambda_{-j}(s)``.
    """
    br = continue_branch(L, j, [h, 2 * h], eps, variant, with_vectors=False)
    l1, l2 = br.lam
    if variant == "boltzmann" and j in (-1, 1):
        # lambda_j(-s) = lambda_{-j}(s), so the even part is the pair average
        other = continue_branch(L, -j, [h, 2 * h], eps, variant, with_vectors=False).lam
        l1, l2 = 0.5 * (l1 + other[0]), 0.5 * (l2 + other[1])
        base = 0j
    else:
        base = branch_origin(j, eps, variant)
    d1 = 2 * (l1 - base) / h ** 2
    d2 = 2 * (l2 - base) / (2 * h) ** 2
    return complex((4 * d1 - d2) / 3)


def extrapolated_intercept(L, j, eps=1.0, h=1e-3):
    """``lambda_j(0)`` by Richardson extrapolation in ``s^2`` from ``s = h, 2h``."""
    lam = continue_branch(L, j, [h, 2 * h], eps, "vpb", with_vectors=False).lam
    return complex((4 * lam[0] - lam[1]) / 3)


# --------------------------------------------------------------------------
# Euler-Poisson structure

def euler_poisson_eigenvectors(s):
    """Closed-form eigenvectors of ``A(s e1)``, orthonormal under ``I + s^-2 e0 e0^T``.

    The first component of ``psi_0`` is negative; with that sign
    ``A psi_0 = 0`` holds exactly.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    g = np.sqrt(1 + 5.0 / 3.0 * s * s)
    r = np.sqrt(1 + s * s)
    out = {0: np.array([-SQ23 * s * s / (g * r), 0, 0, 0, r / g], dtype=complex)}
    for j in (-1, 1):
        out[j] = (np.sqrt(2) / 2) * np.array([s / g, -j, 0, 0, SQ23 * s / g], dtype=complex)
    out[2] = np.array([0, 0, 1, 0, 0], dtype=complex)
    out[3] = np.array([0, 0, 0, 1, 0], dtype=complex)
    return out


def euler_poisson_eigenvalues(s):
    r = np.sqrt(1 + 5.0 / 3.0 * s * s)
    return {-1: -1j * r, 0: 0j, 1: 1j * r, 2: 0j, 3: 0j}


def euler_poisson_check(s):
    """Max eigen-residual and max weighted orthonormality defect at ``s``."""
    A = assemble_A(s)
    vecs = euler_poisson_eigenvectors(s)
    vals = euler_poisson_eigenvalues(s)
    G = np.eye(5)
    G[0, 0] += 1 / s ** 2
    res = max(np.linalg.norm(A @ vecs[j] - vals[j] * vecs[j]) for j in vecs)
    keys = sorted(vecs)
    gram = np.array([[np.vdot(vecs[k], G @ vecs[i]) for k in keys] for i in keys])
    return float(res), float(np.max(np.abs(gram - np.eye(5))))


# --------------------------------------------------------------------------
# eigenfunction expansion

def leading_terms(L, j):
    """``(psi_{j,0}, psi_{j,1})`` coefficient vectors for the VPB branches."""
    basis = L.basis
    chi = basis.chi
    V1 = coordinate_multiplication(basis, 0)
    P1 = projections(basis).P1
    if j == 0:
        return chi[4].astype(complex), 1j * solve_micro(L, 0, P1 @ (V1 @ chi[4]))
    if j in (-1, 1):
        h = np.sqrt(2) / 2
        p0 = h * chi[1].astype(complex)
        micro = solve_micro(L, 1j * j, P1 @ (V1 @ chi[1]))  # (L -+ i P1)^{-1}
        p1 = -j * h * chi[0] - j * (np.sqrt(3) / 3) * chi[4] + h * 1j * micro
        return p0, p1
    if j in (2, 3):
        return chi[j].astype(complex), 1j * solve_micro(L, 0, P1 @ (V1 @ chi[j]))
    raise ValueError("branch index must be one of -1, 0, 1, 2, 3")


@dataclass
class LeadingTermTable:
    j: int
    s: np.ndarray
    overlap0: np.ndarray       # |(psi_j(s), psi_{j,0})| / |psi_{j,0}|^2
    residual0: np.ndarray      # ||psi_j(s) - psi_{j,0}||
    residual1: np.ndarray      # ||psi_j(s) - psi_{j,0} - s psi_{j,1}||
    chi0_over_s2: np.ndarray   # (psi_j(s) - psi_{j,0} - s psi_{j,1}, chi_0) / s^2

    @property
    def converging(self):
        order = np.argsort(self.s)
        r0 = self.residual0[order]
        r1 = self.residual1[order]
        return bool(np.all(np.diff(r0) > 0) and np.all(np.diff(r1) > 0))


def eigenfunction_leading_terms(L, branch):
    """Compare the eigenvectors carried by ``branch`` with the first two expansion terms."""
    p0, p1 = leading_terms(L, branch.j)
    rows = []
    for smp in branch.samples:
        psi = smp.psi
        s = smp.s
        rem1 = psi - p0 - s * p1
        rows.append((s, abs(np.vdot(p0, psi)) / np.vdot(p0, p0).real,
                     np.linalg.norm(psi - p0), np.linalg.norm(rem1), rem1[0] / s ** 2))
    a = list(zip(*rows))
    return LeadingTermTable(branch.j, np.array(a[0]), np.array(a[1]), np.array(a[2]),
                            np.array(a[3]), np.array(a[4]))


__all__ = [
    "CoefficientSet", "BoltzmannCoefficientSet", "ExpansionReport", "LeadingTermTable",
    "vpb_coefficients", "boltzmann_coefficients", "relaxation_closed_forms", "lambda_second_formula",
    "validate_expansion", "numerical_second_derivative", "extrapolated_intercept",
    "euler_poisson_eigenvectors",
    "euler_poisson_eigenvalues", "euler_poisson_check", "leading_terms",
    "eigenfunction_leading_terms",
]
