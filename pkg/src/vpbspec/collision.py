"""Galerkin matrices of the linearized collision operator ``L``.

Three models are provided: BGK relaxation, a rotation-invariant spectral
relaxation model with one rate per Burnett label ``(n, l)``, and the hard
sphere operator assembled by exact quadrature of its weak form.
"""
import hashlib
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from . import kernels
from .velocity import BasisError, projections, rotation_generator

INVARIANT_LABELS = frozenset({(0, 0), (1, 1), (2, 0)})


class ConditioningError(RuntimeError):
    """A linear solve was too ill-conditioned to be trusted."""


@dataclass(frozen=True, eq=False)
class CollisionMatrix:
    """Symmetric negative semidefinite Galerkin matrix of ``L``.

    :param matrix: ``(dim, dim)`` real symmetric matrix.
    :param model_tag: ``bgk``, ``spectral_relaxation`` or ``hard_sphere``.
    :param nu0: lower bound of the collision frequency.
    :param mu: measured coercivity constant (spectral gap of ``-L`` on range(P1)).
    :param basis: the :class:`~vpbspec.velocity.HermiteBasis` used.
    """

    matrix: np.ndarray
    model_tag: str
    nu0: float
    mu: float
    basis: object
    diagnostics: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def micro(self):
        """``L`` restricted to range(P1) in the orthonormal basis ``U1``."""
        U1 = projections(self.basis).U1
        return U1.T @ self.matrix @ U1


def _measure_mu(L, basis):
    U1 = projections(basis).U1
    ev = np.linalg.eigvalsh(U1.T @ L @ U1)
    return float(-ev.max())


def _finish(L, basis, tag, nu0, diagnostics=None):
    L = 0.5 * (L + L.T)
    L.setflags(write=False)
    mu = _measure_mu(L, basis)
    return CollisionMatrix(L, tag, float(nu0), mu, basis, dict(diagnostics or {}))


def assemble_bgk(nu0, basis):
    """BGK relaxation ``L = -nu0 P1``; its coercivity constant is ``nu0``."""
    if not nu0 > 0:
        raise ValueError("nu0 must be positive")
    P1 = projections(basis).P1
    return _finish(-float(nu0) * P1, basis, "bgk", nu0)


# --------------------------------------------------------------------------
# spectral relaxation

def burnett_decomposition(basis):
    """Split the basis into rotation-invariant blocks labelled ``(n, l)``.

    Within each total degree ``n`` the Casimir ``-(J1^2 + J2^2 + J3^2)`` is
    diagonalized; its eigenvalue ``l(l+1)`` gives the angular label.

    :returns: dict ``(n, l) -> (dim, m)`` orthonormal block basis.
    """
    cached = basis._cache.get("burnett")
    if cached is not None:
        return cached
    J = [rotation_generator(basis, a) for a in range(3)]
    C = -(J[0] @ J[0] + J[1] @ J[1] + J[2] @ J[2])
    deg = basis.degrees
    blocks = {}
    for n in range(basis.K + 1):
        sel = np.flatnonzero(deg == n)
        w, v = np.linalg.eigh(C[np.ix_(sel, sel)])
        ls = np.rint((-1 + np.sqrt(1 + 4 * np.clip(w, 0, None))) / 2).astype(int)
        for l in sorted(set(ls.tolist())):
            cols = np.zeros((basis.dimension, int(np.sum(ls == l))))
            cols[sel] = v[:, ls == l]
            blocks[(n, int(l))] = cols
    basis._cache["burnett"] = blocks
    return blocks


def default_rate(n, l):
    """Default relaxation rate for the Burnett label ``(n, l)``."""
    return 1.0 + 0.5 * (n - 2) + 0.05 * l


@dataclass(frozen=True)
class RelaxationSpectrum:
    """Relaxation rates keyed by Burnett label ``(n, l)``.

    The collision invariants ``(0,0)``, ``(1,1)`` and ``(2,0)`` carry no rate.
    """

    rates: dict

    def __post_init__(self):
        for key, r in self.rates.items():
            if tuple(key) in INVARIANT_LABELS:
                raise ValueError(f"label {key} is a collision invariant and takes no rate")
            if not r > 0:
                raise ValueError(f"rate for {key} must be positive")

    @classmethod
    def from_function(cls, K, func=default_rate):
        labels = [(n, l) for n in range(K + 1) for l in range(n % 2, n + 1, 2)]
        return cls({lab: float(func(*lab)) for lab in labels if lab not in INVARIANT_LABELS})

    @classmethod
    def uniform(cls, K, nu0):
        return cls.from_function(K, lambda n, l: nu0)


def assemble_spectral_relaxation(spec, basis):
    """``L = -sum rate(n,l) Pi_(n,l)`` over the non-invariant Burnett blocks."""
    blocks = burnett_decomposition(basis)
    L = np.zeros((basis.dimension, basis.dimension))
    rates = {tuple(k): v for k, v in spec.rates.items()}
    used = []
    for lab, B in blocks.items():
        if lab in INVARIANT_LABELS:
            continue
        if lab not in rates:
            raise ValueError(f"missing relaxation rate for label {lab}")
        L -= rates[lab] * (B @ B.T)
        used.append(rates[lab])
    nu0 = min(used) if used else 1.0
    return _finish(L, basis, "spectral_relaxation", nu0)


# --------------------------------------------------------------------------
# hard sphere

HS_CACHE_MAGIC = b"VPBLMAT\0"
HS_CACHE_VERSION = 1
HS_MAX_ROWS = 5_000_000


def collision_frequency(v):
    """Hard-sphere collision frequency ``nu(v) = 2 pi E|v - v_*|``, ``v_* ~ M``."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    r = np.linalg.norm(v, axis=-1)
    out = np.empty_like(r)
    small = r < 1e-6
    out[small] = 2 * np.sqrt(2 / np.pi) * (1 + r[small] ** 2 / 6)
    rs = r[~small]
    out[~small] = (np.sqrt(2 / np.pi) * np.exp(-rs ** 2 / 2)
                   + (rs + 1 / rs) * special.erf(rs / np.sqrt(2)))
    return 2 * np.pi * out


@dataclass(frozen=True)
class HardSphereQuadrature:
    """Node counts for the ``(V, rho, sigma)`` quadrature of the weak form.

    ``V = (v + v_*)/2`` uses Gauss-Hermite per axis, ``r = rho^2/4`` uses
    generalized Gauss-Laguerre, and ``sigma`` a Gauss-Legendre x uniform
    product rule on the sphere. :meth:`exact` gives the smallest counts for
    which every Galerkin entry is integrated exactly.
    """

    n_center: int
    n_radial: int
    n_polar: int
    n_azimuth: int

    @classmethod
    def exact(cls, K):
        return cls(K + 1, (K + 2) // 2, K + 1, 2 * K + 2)

    def scaled(self, factor):
        return HardSphereQuadrature(*(max(1, int(round(n * factor))) for n in
                                      (self.n_center, self.n_radial, self.n_polar, self.n_azimuth)))

    def rows(self):
        # sigma and -sigma give the same integrand, so only half the azimuths are kept
        naz = self.n_azimuth // 2 if self.n_azimuth % 2 == 0 else self.n_azimuth
        return self.n_center ** 3 * self.n_radial * self.n_polar * naz

    def key(self):
        return (self.n_center, self.n_radial, self.n_polar, self.n_azimuth)


def _sphere_half_rule(n_polar, n_azimuth):
    """Points on a hemisphere-quotient of S^2 with weights summing to 4 pi."""
    x, w = np.polynomial.legendre.leggauss(n_polar)
    if n_azimuth % 2:
        phi = 2 * np.pi * np.arange(n_azimuth) / n_azimuth
        wphi = np.full(n_azimuth, 2 * np.pi / n_azimuth)
    else:
        # pair phi with phi + pi and (x, phi) with (-x, phi + pi): antipodal images
        phi = 2 * np.pi * np.arange(n_azimuth // 2) / n_azimuth
        wphi = np.full(n_azimuth // 2, 4 * np.pi / n_azimuth)
    st = np.sqrt(1 - x ** 2)
    pts = np.stack([
        np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
        np.outer(x, np.ones_like(phi))], axis=-1).reshape(-1, 3)
    wts = np.outer(w, wphi).ravel()
    return pts, wts


def _hs_raw(basis, quad, chunk_rows=40_000):
    """Unsymmetrized Galerkin matrix of the hard-sphere ``L``."""
    K = basis.K
    idx = basis.index_map
    dim = basis.dimension
    # V-quadrature with weight exp(-|V|^2)
    xc, wc = special.roots_hermite(quad.n_center)
    Vc = np.stack(np.meshgrid(xc, xc, xc, indexing="ij"), axis=-1).reshape(-1, 3)
    Wc = (wc[:, None, None] * wc[None, :, None] * wc[None, None, :]).ravel()
    # int rho^3 e^{-rho^2/4} p(rho^2) d rho = 8 int r e^{-r} p(4 r) dr
    xr, wr = special.roots_genlaguerre(quad.n_radial, 1.0)
    rho = 2 * np.sqrt(xr)
    wrho = 8 * wr
    sig, wsig = _sphere_half_rule(quad.n_polar, quad.n_azimuth)
    nsig = sig.shape[0]
    pref = -0.25 * (2 * np.pi) ** -3 * 0.5

    Lq = np.zeros((dim, dim))
    Ls = np.zeros((dim, dim))
    pairs = [(c, r) for c in range(Vc.shape[0]) for r in range(rho.size)]
    per_chunk = max(1, chunk_rows // nsig)
    for start in range(0, len(pairs), per_chunk):
        block = pairs[start:start + per_chunk]
        ci = np.array([p[0] for p in block])
        ri = np.array([p[1] for p in block])
        centers = np.repeat(Vc[ci], nsig, axis=0)
        offsets = (0.5 * rho[ri])[:, None, None] * sig[None, :, :]
        G = kernels.tensor_hermite_even(centers, offsets.reshape(-1, 3), K, idx)
        wpair = pref * Wc[ci] * wrho[ri]  # per (V, r)
        wq = (wpair[:, None] * wsig[None, :]).ravel()
        Lq += 8 * np.pi * (G.T @ (wq[:, None] * G))
        S = (G.reshape(len(block), nsig, dim) * wsig[None, :, None]).sum(axis=1)
        Ls -= 2 * (S.T @ (wpair[:, None] * S))
    return Lq + Ls


def _hs_cache_path(cache_dir, K, quad):
    h = hashlib.sha256(repr((K, quad.key())).encode()).hexdigest()[:16]
    return os.path.join(cache_dir, f"hs_K{K}_{h}.bin")


def write_matrix_cache(path, K, matrix):
    """Write ``matrix`` with the 32-byte versioned header."""
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    header = HS_CACHE_MAGIC + struct.pack("<IIQQ", HS_CACHE_VERSION, K, *matrix.shape)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(matrix.tobytes(order="C"))
    os.replace(tmp, path)


def read_matrix_cache(path, K=None):
    """Read a cached matrix; returns ``None`` if the header does not match."""
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) != 32 or header[:8] != HS_CACHE_MAGIC:
            return None
        version, k, rows, cols = struct.unpack("<IIQQ", header[8:])
        if version != HS_CACHE_VERSION or (K is not None and k != K):
            return None
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        return None
    return data.reshape(rows, cols).astype(float)


def assemble_hard_sphere(basis, quad_spec=None, cache_dir=None, max_rows=HS_MAX_ROWS):
    """Hard-sphere ``L`` from the symmetrized weak form.

    :param quad_spec: :class:`HardSphereQuadrature`; defaults to the exact rule.
    :param cache_dir: optional directory for the binary matrix cache.
    :param max_rows: budget on quadrature rows; larger requests are rejected.
    """
    if basis.K < 2:
        raise BasisError("hard-sphere assembly needs K >= 2")
    quad = quad_spec or HardSphereQuadrature.exact(basis.K)
    rows = quad.rows()
    if rows > max_rows:
        est = rows * basis.dimension ** 2 * 2 / 2e10
        raise ValueError(f"quadrature needs {rows} rows (~{est:.0f} s), over budget {max_rows}")
    raw = None
    path = None
    if cache_dir is not None:
        path = _hs_cache_path(cache_dir, basis.K, quad)
        if os.path.exists(path):
            raw = read_matrix_cache(path, basis.K)
    if raw is None:
        raw = _hs_raw(basis, quad)
        if path is not None:
            os.makedirs(cache_dir, exist_ok=True)
            write_matrix_cache(path, basis.K, raw)
    chi = basis.chi
    asym = float(np.linalg.norm(raw - raw.T) / max(np.linalg.norm(raw), 1e-300))
    null_defect = float(np.max(np.linalg.norm(raw @ chi.T, axis=0)))
    P1 = projections(basis).P1
    L = P1 @ (0.5 * (raw + raw.T)) @ P1
    nu0 = float(collision_frequency(np.zeros(3))[0])
    diag = {"asymmetry": asym, "null_defect": null_defect, "quadrature": list(quad.key())}
    return _finish(L, basis, "hard_sphere", nu0, diag)


# --------------------------------------------------------------------------
# micro solves

def _micro_solve(L, M_micro, rhs, check_tol=1e-10, cond_max=1e12):
    basis = L.basis
    proj = projections(basis)
    rhs = np.asarray(rhs)
    macro = basis.chi @ rhs
    if np.linalg.norm(macro) > check_tol * max(1.0, np.linalg.norm(rhs)):
        raise ValueError("right-hand side has a macroscopic component")
    lu = linalg.lu_factor(M_micro, check_finite=False)
    rc = np.abs(np.diag(lu[0]))
    if rc.min() <= rc.max() / cond_max:
        raise ConditioningError("micro operator is numerically singular at this shift")
    y = linalg.lu_solve(lu, proj.U1.T @ rhs, check_finite=False)
    return proj.U1 @ y


def solve_micro(L, shift, rhs):
    """Solve ``(L - shift P1) x = rhs`` on range(P1).

    :param shift: complex ``lambda``; ``Re lambda > -mu`` or ``lambda = 0``.
    :param rhs: coefficient vector with no fluid component.
    """
    shift = complex(shift)
    if shift != 0 and not shift.real > -L.mu:
        raise ConditioningError("shift lies at or beyond the coercivity bound")
    Lm = L.micro
    A = Lm - shift * np.eye(Lm.shape[0]) if shift != 0 else Lm
    if shift.imag == 0 and np.isrealobj(rhs):
        A = A.real
    return _micro_solve(L, A, rhs)


def model_tolerance(L):
    """Null-space and symmetry tolerance appropriate for the model."""
    return 1e-10 if L.model_tag != "hard_sphere" else 1e-8


def nu_bounds_fit(radii=(0.0, 1.0, 2.0)):
    """Fitted ``c1, c2`` with ``c1 (1+|v|) <= nu(v) <= c2 (1+|v|)`` on the samples."""
    r = np.asarray(radii, dtype=float)
    nu = collision_frequency(np.stack([r, 0 * r, 0 * r], axis=-1))
    ratio = nu / (1 + r)
    return float(ratio.min()), float(ratio.max()), nu


def assemble_model(tag, basis, nu0=1.0, rates=None, quadrature_scale=1, cache_dir=None):
    """Build a collision matrix by model tag.

    :param rates: spectral-relaxation overrides keyed ``(n, l)`` or ``"n,l"``.
    """
    if tag == "bgk":
        return assemble_bgk(nu0, basis)
    if tag == "spectral_relaxation":
        table = RelaxationSpectrum.from_function(basis.K).rates
        for key, val in (rates or {}).items():
            lab = tuple(int(x) for x in key.split(",")) if isinstance(key, str) else tuple(key)
            table[lab] = float(val)
        return assemble_spectral_relaxation(RelaxationSpectrum(table), basis)
    if tag == "hard_sphere":
        quad = HardSphereQuadrature.exact(basis.K).scaled(quadrature_scale)
        return assemble_hard_sphere(basis, quad, cache_dir or None)
    raise ValueError(f"unknown collision model {tag!r}")


__all__ = [
    "assemble_model", "CollisionMatrix", "RelaxationSpectrum", "HardSphereQuadrature", "ConditioningError",
    "assemble_bgk", "assemble_spectral_relaxation", "assemble_hard_sphere",
    "burnett_decomposition", "collision_frequency", "default_rate", "solve_micro",
    "read_matrix_cache", "write_matrix_cache", "model_tolerance", "nu_bounds_fit",
]
