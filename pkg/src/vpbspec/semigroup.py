"""Mode propagation, the S1/S2 split, radial norm assembly and decay fits.

A Fourier mode ``f(t, xi) = exp(t B(xi)) f0(xi)`` is propagated through the
eigendecomposition of the symmetrized symbol. Physical-space ``L^2_x`` norms
follow from Plancherel as radial integrals ``int 4 pi s^2 |obs(s, t)|^2 ds``
with the mode evaluated at ``omega = e1``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .symbols import assemble_symbol
from .velocity import projections

OBSERVABLES = ("density", "momentum", "energy", "efield", "micro", "hp_norm")
BOLTZMANN_OBSERVABLES = ("density", "momentum", "energy", "micro", "hp_norm")
NSP_OBSERVABLES = ("density", "momentum", "energy")


RATE_TOL = 0.08
# optimal exponents per (generator, data family); nsp rows use (density, momentum, energy)
EXPECTED_RATES = {
    ("vpb", "density_energy"): {"density": -0.75, "momentum": -0.25, "energy": -0.75,
                                "efield": -0.25, "micro": -0.75, "hp_norm": -0.25},
    ("vpb", "zero_mean"): {"density": -1.25, "momentum": -0.75, "energy": -0.75,
                           "efield": -0.75, "micro": -1.25, "hp_norm": -0.75},
    ("boltzmann", "density_energy"): {"density": -0.75, "momentum": -0.75, "energy": -0.75,
                                      "micro": -1.25, "hp_norm": -0.75},
    ("nsp", "density_energy"): {"density": -0.75, "momentum": -0.25, "energy": -0.75},
    ("nsp", "zero_density"): {"density": -1.25, "momentum": -0.75, "energy": -0.75},
}
NSP_DATA = {"density_energy": (1.0, 0.0, 1.0), "zero_density": (0.0, 1.0, 1.0)}


class QualityGateError(RuntimeError):
    """A numerical-quality gate (conditioning or quadrature convergence) failed."""


# --------------------------------------------------------------------------
# propagators

class ModePropagator:
    """``exp(t M)`` for a matrix similar to a well-conditioned one by a diagonal scaling.

    :param matrix: generator ``M``.
    :param gram_sqrt: diagonal ``d`` such that ``d M d^{-1}`` is better conditioned
        (``G^{1/2}`` for the VPB symbol).
    :param cond_max: eigenvector condition number above which the matrix
        exponential is used instead.
    """

    def __init__(self, matrix, gram_sqrt=None, cond_max=1e8):
        self.matrix = np.asarray(matrix, dtype=complex)
        n = self.matrix.shape[0]
        self.d = np.ones(n) if gram_sqrt is None else np.asarray(gram_sqrt, dtype=float)
        S = (self.d[:, None] * self.matrix) / self.d[None, :]
        self.values, self.X = linalg.eig(S, check_finite=False)
        self.cond = float(np.linalg.cond(self.X))
        self.use_expm = not np.isfinite(self.cond) or self.cond > cond_max
        if not self.use_expm:
            self.Xinv = linalg.inv(self.X, check_finite=False)
            rec = (self.X * self.values) @ self.Xinv
            self.reconstruction = float(np.linalg.norm(rec - S) / max(np.linalg.norm(S), 1e-300))
        else:
            self.Xinv = None
            self.reconstruction = np.nan
        self._S = S

    @classmethod
    def from_symbol(cls, sym, cond_max=1e8):
        return cls(sym.matrix, sym.gram_sqrt, cond_max)

    @property
    def max_real(self):
        return float(self.values.real.max())

    def propagate(self, f0, times):
        """Columns ``f(t_k)`` for every time, shape ``(dim, len(times))``."""
        times = np.asarray(times, dtype=float)
        if np.any(times < 0):
            raise ValueError("times must be nonnegative")
        y0 = self.d * np.asarray(f0, dtype=complex)
        if self.use_expm:
            cols = [linalg.expm(t * self._S) @ y0 for t in times]
            Y = np.stack(cols, axis=1) if cols else np.zeros((y0.size, 0), complex)
        else:
            c = self.Xinv @ y0
            E = np.exp(np.outer(self.values, times))
            Y = self.X @ (E * c[:, None])
        F = Y / self.d[:, None]
        F[:, times == 0] = np.asarray(f0, dtype=complex)[:, None]
        return F

    def spectral_projector(self, idx):
        """``P_J`` onto the eigenvalues ``idx`` in original coordinates."""
        if self.use_expm:
            raise QualityGateError("eigenvectors too ill-conditioned for spectral projection")
        P = self.X[:, idx] @ self.Xinv[idx, :]
        return (P / self.d[:, None]) * self.d[None, :]

    def rightmost(self, k=5):
        return np.argsort(-self.values.real)[:k]


@dataclass
class SplitResult:
    S: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    projector_defect: float
    active: bool


def split_S1_S2(prop, f0, times, s, r0, k=5):
    """``S = S1 + S2`` with ``S1`` the projection on the ``k`` rightmost eigenvalues.

    ``S1`` vanishes for ``s > r0``.
    """
    S = prop.propagate(f0, times)
    times = np.asarray(times, dtype=float)
    if s > r0:
        return SplitResult(S, np.zeros_like(S), S.copy(), 0.0, False)
    idx = prop.rightmost(k)
    P = prop.spectral_projector(idx)
    defect = float(np.linalg.norm(P @ P - P) / max(np.linalg.norm(P), 1.0))
    if defect > 1e-6:
        raise QualityGateError(f"branch projector defect {defect:.3g}")
    y0 = prop.d * np.asarray(f0, dtype=complex)
    c = prop.Xinv[idx, :] @ y0
    S1 = (prop.X[:, idx] @ (np.exp(np.outer(prop.values[idx], times)) * c[:, None]))
    S1 = S1 / prop.d[:, None]
    return SplitResult(S, S1, S - S1, defect, True)


def s1_from_eigenfunctions(pairs, metric_weight, f0, times):
    """``sum_j exp(t lam_j) (f0, conj psi_j)_xi psi_j`` for ``pairs = [(lam, psi)]``."""
    f0 = np.asarray(f0, dtype=complex)
    times = np.asarray(times, dtype=float)
    out = np.zeros((f0.size, times.size), dtype=complex)
    for lam, psi in pairs:
        coef = np.dot(psi, f0) + metric_weight * psi[0] * f0[0]
        out += np.outer(psi, coef * np.exp(lam * times))
    return out


def fit_sigma0(times, norms, floor=1e-12):
    """Exponential rate ``sigma0`` from ``log norms`` vs ``t`` over values above ``floor``."""
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    keep = norms > floor * max(norms.max(), 1e-300)
    if keep.sum() < 3:
        raise ValueError("not enough samples above the floor to fit sigma0")
    slope, _ = np.polyfit(times[keep], np.log(norms[keep]), 1)
    return float(-slope)


def s1_moments_closed_form(lams, n0, m0, q0, t, s, omega=(1.0, 0.0, 0.0)):
    """Leading density, momentum and energy of ``S1(t) f0`` (no remainder operators).

    :param lams: mapping ``j -> lambda_j(s)`` for ``j = -1..3``.
    :param m0: momentum 3-vector.
    :returns: ``(n, m, q)`` with ``m`` a 3-vector.
    """
    omega = np.asarray(omega, dtype=float)
    m0 = np.asarray(m0, dtype=complex)
    e = {j: np.exp(lams[j] * t) for j in (-1, 0, 1, 2, 3)}
    n = 0.5 * (e[1] + e[-1]) * n0
    mw = m0 @ omega
    m = 0.5 * sum(e[j] * (mw - j / s * n0) for j in (-1, 1)) * omega
    # shear directions orthogonal to omega
    basis = np.linalg.svd(omega[None, :])[2][1:]
    for j, W in zip((2, 3), basis):
        m = m + e[j] * (m0 @ W) * W
    q = np.sqrt(1 / 6) * (e[1] + e[-1]) * n0 + e[0] * (q0 - np.sqrt(2 / 3) * n0)
    return n, m, q


# --------------------------------------------------------------------------
# initial data and observables

@dataclass(frozen=True)
class InitialDataFamily:
    """Radial initial data evaluated at ``xi = s e1``.

    ``density_energy``: ``d0 e^{r0^2/2} e^{-s^2/2} chi_0 + d1 d0 e^{r0^2} e^{-s^2/2} chi_4``.
    ``zero_mean``: ``d0 e^{r0^2/2} e^{-s^2/2} ((v . omega) sqrt(M) + chi_4)``, which
    is ``chi_1 + chi_4`` at ``omega = e1``.
    ``custom``: ``e^{-s^2/2}`` times the given macroscopic coefficients.
    """

    tag: str = "density_energy"
    d0: float = 1.0
    d1: float = 1.0
    r0: float = 0.5
    coeffs: tuple = ()

    def __post_init__(self):
        if self.tag not in ("density_energy", "zero_mean", "custom"):
            raise ValueError(f"unknown initial-data family {self.tag!r}")

    def macro(self, s):
        """Coefficients on ``chi_0..chi_4`` at ``s``."""
        g = np.exp(-0.5 * s * s)
        c = np.zeros(5)
        if self.tag == "density_energy":
            c[0] = self.d0 * np.exp(self.r0 ** 2 / 2) * g
            c[4] = self.d1 * self.d0 * np.exp(self.r0 ** 2) * g
        elif self.tag == "zero_mean":
            c[1] = c[4] = self.d0 * np.exp(self.r0 ** 2 / 2) * g
        else:
            c[:len(self.coeffs)] = np.asarray(self.coeffs, dtype=float) * g
        return c

    def vector(self, basis, s, omega=None):
        """Coefficient vector of ``f0(s omega)``; the default ``omega`` is ``e1``."""
        c = self.macro(s)
        if omega is not None and self.tag != "custom":
            omega = np.asarray(omega, dtype=float)
            c = c.copy()
            c[1:4] = c[1] * omega
        return c @ basis.chi


def observables(basis, F, s, weight, names=OBSERVABLES):
    """Squared observable amplitudes for columns ``F`` of mode values at ``s``.

    ``weight`` is the Poisson weight ``1/(eps s)^2`` (0 for Boltzmann).
    """
    chi = basis.chi
    P1 = projections(basis).P1
    n = F[0]
    out = {}
    if "density" in names:
        out["density"] = np.abs(n) ** 2
    if "momentum" in names:
        out["momentum"] = np.sum(np.abs(F[1:4]) ** 2, axis=0)
    if "energy" in names:
        out["energy"] = np.abs(chi[4] @ F) ** 2
    if "efield" in names:
        out["efield"] = weight * np.abs(n) ** 2
    if "micro" in names:
        out["micro"] = np.sum(np.abs(P1 @ F) ** 2, axis=0)
    if "hp_norm" in names:
        out["hp_norm"] = np.sum(np.abs(F) ** 2, axis=0) + weight * np.abs(n) ** 2
    return out


def rotation_spot_check(family, L, s, times, n=3, seed=0, variant="vpb", eps=1.0):
    """Max relative deviation of the observables at ``n`` random ``omega`` from ``omega = e1``.

    Validates the reduction of radial integrals to a single direction.
    """
    rng = np.random.default_rng(seed)
    names = OBSERVABLES if variant == "vpb" else BOLTZMANN_OBSERVABLES

    def obs(omega):
        sym = assemble_symbol(L, s, variant, eps, omega)
        F = ModePropagator.from_symbol(sym).propagate(family.vector(L.basis, s, omega), times)
        w = sym.metric.weight if sym.metric is not None else 0.0
        return observables(L.basis, F, s, w, names)

    ref = obs(np.array([1.0, 0.0, 0.0]))
    dev = 0.0
    for _ in range(n):
        om = rng.standard_normal(3)
        om /= np.linalg.norm(om)
        o = obs(om)
        for k in names:
            dev = max(dev, float(np.max(np.abs(o[k] - ref[k]) / np.maximum(ref[k], 1e-300))))
    return dev


# --------------------------------------------------------------------------
# radial quadrature

@dataclass(frozen=True)
class RadialGrid:
    """Radial grid with Simpson weights in ``ln s`` and a power-law tail below ``s_min``.

    The base grid is log-spaced with ``n`` points. When ``speed > 0`` the step
    is also capped so that the acoustic phase ``speed * s * t`` advances by at
    most ``kappa`` between neighbours for every ``t <= t_max`` at which the mode
    is not yet damped (``damping * s^2 * t <= horizon``). Integrals use the
    doubled grid (midpoints inserted) and are compared against the base grid.
    """

    s_min: float = 1e-3
    s_max: float = 20.0
    n: int = 240
    speed: float = 0.0
    t_max: float = 1e4
    damping: float = 1.0
    kappa: float = 0.8
    horizon: float = 12.0

    def __post_init__(self):
        if not (0 < self.s_min < self.s_max) or self.n < 5:
            raise ValueError("invalid radial grid")
        if self.speed < 0 or self.kappa <= 0 or self.damping <= 0:
            raise ValueError("invalid oscillation parameters")

    @property
    def base(self):
        if self.speed == 0:
            return np.geomspace(self.s_min, self.s_max, self.n)
        h = np.log(self.s_max / self.s_min) / (self.n - 1)
        pts = [self.s_min]
        x = self.s_min
        while x < self.s_max:
            t_eff = min(self.t_max, self.horizon / (self.damping * x * x))
            x = x + min(h * x, self.kappa / (self.speed * t_eff))
            pts.append(min(x, self.s_max))
        return np.array(pts)

    @property
    def s(self):
        """Points of the doubled grid."""
        b = self.base
        out = np.empty(2 * b.size - 1)
        out[::2] = b
        out[1::2] = np.sqrt(b[:-1] * b[1:]) if self.speed == 0 else 0.5 * (b[:-1] + b[1:])
        return out


def default_grid(L, variant="vpb", t_max=1e4, s_min=1e-3, s_max=20.0, n=240):
    """Default radial grid; the Boltzmann variant resolves the acoustic phase."""
    if variant == "vpb":
        return RadialGrid(s_min, s_max, n)
    from .asymptotics import boltzmann_coefficients
    a = boltzmann_coefficients(L).a_pm1
    c = np.sqrt(5.0 / 3.0)
    # the tail below s_min must not oscillate: c s_min t_max <= 0.1
    return RadialGrid(min(s_min, 0.1 / (c * t_max)), s_max, n, speed=c, t_max=float(t_max),
                      damping=float(a))


def radial_integral(s, vals):
    """``int_0^inf 4 pi s^2 v(s) ds`` for samples ``vals`` (``(n, ...)``) on log-spaced ``s``."""
    s = np.asarray(s, dtype=float)
    vals = np.asarray(vals, dtype=float)
    x = np.log(s)
    w = (4 * np.pi * s ** 3).reshape((-1,) + (1,) * (vals.ndim - 1))
    body = integrate.simpson(w * vals, x=x, axis=0)
    # power-law tail v ~ v0 (s/s0)^p on (0, s0)
    v0, v1 = vals[0], vals[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.log(np.where(v0 > 0, v1 / v0, 1.0)) / (x[1] - x[0])
        tail = np.where((v0 > 0) & (p > -3 + 1e-3), 4 * np.pi * v0 * s[0] ** 3 / (3 + p), 0.0)
    return body + tail


@dataclass
class NormSeries:
    """Physical-space ``L^2_x`` norms per observable on a time grid."""

    times: np.ndarray
    norms: dict
    converged: bool
    convergence_error: float
    s_grid: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _assemble(times, s, amplitudes, names):
    sq = {k: radial_integral(s, amplitudes[k]) for k in names}
    half = {k: radial_integral(s[::2], amplitudes[k][::2]) for k in names}
    err = 0.0
    for k in names:
        full = np.sqrt(np.maximum(sq[k], 0))
        hv = np.sqrt(np.maximum(half[k], 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(full > 0, np.abs(full - hv) / full, 0.0)
        err = max(err, float(np.max(rel)))
    return {k: np.sqrt(np.maximum(sq[k], 0)) for k in names}, err


def _map(func, items, threads=1):
    """Ordered map, optionally over a thread pool (LAPACK releases the GIL)."""
    if threads is None or threads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(func, items))


def assemble_physical_norms(family, L, times, grid=None, variant="vpb", eps=1.0,
                            tol=1e-3, alpha=0, threads=1):
    """Radially integrated observable norms of ``exp(t B) f0``.

    :param alpha: spatial-derivative order (0 or 1) weighting ``|xi|^{2 alpha}``.
    :param threads: worker threads over radial modes; results do not depend on it.
    :raises QualityGateError: if halving the radial resolution changes some
        norm by ``tol`` or more.
    """
    times = np.asarray(times, dtype=float)
    if grid is None:
        grid = default_grid(L, variant, times.max())
    s = grid.s
    names = OBSERVABLES if variant == "vpb" else BOLTZMANN_OBSERVABLES
    f_vec = family.vector

    def mode(si):
        sym = assemble_symbol(L, si, variant, eps)
        prop = ModePropagator.from_symbol(sym)
        F = prop.propagate(f_vec(L.basis, si), times)
        w = sym.metric.weight if sym.metric is not None else 0.0
        obs = observables(L.basis, F, si, w, names)
        return obs, prop.cond, prop.use_expm, prop.max_real

    results = _map(mode, s, threads)
    amps = {k: np.stack([r[0][k] for r in results]) * (s ** (2 * alpha))[:, None]
            for k in names}
    max_cond = max(r[1] for r in results)
    n_expm = sum(int(r[2]) for r in results)
    max_re = max(r[3] for r in results)
    norms, err = _assemble(times, s, amps, names)
    res = NormSeries(times, norms, err < tol, err, s,
                     {"max_condition": max_cond, "expm_modes": n_expm, "max_real_eig": max_re})
    if not res.converged:
        raise QualityGateError(f"radial quadrature not converged (rel change {err:.3g})")
    return res


# --------------------------------------------------------------------------
# exponent fits

@dataclass
class DecayFit:
    observable: str
    times: np.ndarray
    norms: np.ndarray
    exponent: float
    stderr: float
    window: tuple
    residual: float
    flagged: bool
    converged: bool = True

    @property
    def band(self):
        return (self.exponent - 2 * self.stderr, self.exponent + 2 * self.stderr)


def fit_exponent(times, norms, window=(1e2, 1e4), observable="", residual_max=0.5,
                 drift_max=1.0, converged=True):
    """Least-squares slope of ``log norm`` against ``log(1 + t)`` inside ``window``.

    The fit is flagged when the RMS residual exceeds ``residual_max`` or the
    slopes fitted on the two halves of the window differ by more than
    ``drift_max`` (a non-algebraic series such as an exponential). Bounded
    oscillating factors such as ``|sin t|`` raise both numbers only moderately.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    sel = (times >= window[0]) & (times <= window[1])
    if sel.sum() < 10:
        raise ValueError("at least 10 samples are needed inside the fit window")
    if np.any(norms[sel] <= 0):
        raise ValueError("norms must be positive inside the fit window")
    x = np.log1p(times[sel])
    y = np.log(norms[sel])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    dof = max(len(x) - 2, 1)
    sigma2 = float(r @ r) / dof
    stderr = float(np.sqrt(sigma2 / np.sum((x - x.mean()) ** 2)))
    rms = float(np.sqrt(np.mean(r * r)))
    half = len(x) // 2
    s1 = np.polyfit(x[:half], y[:half], 1)[0]
    s2 = np.polyfit(x[half:], y[half:], 1)[0]
    flagged = rms > residual_max or abs(s1 - s2) > drift_max
    return DecayFit(observable, times, norms, float(coef[0]), stderr, tuple(window), rms,
                    bool(flagged), bool(converged))


def decay_fits(series, window=(1e2, 1e4)):
    return {k: fit_exponent(series.times, v, window, k, converged=series.converged)
            for k, v in series.norms.items()}


# --------------------------------------------------------------------------
# Navier-Stokes-Poisson comparison

@dataclass(frozen=True)
class NspSymbol:
    """Symbol of the linearized NSP system on ``(n, m1, m2, m3, theta)`` at ``xi = s e1``."""

    s: float
    matrix: np.ndarray
    eta: float
    alpha: float


def assemble_nsp(eta, alpha, s, poisson=True):
    """``D(xi)`` of the linearized NSP system; ``poisson=False`` drops the field term."""
    if not s > 0:
        raise ValueError("s must be positive")
    c = np.sqrt(2.0 / 3.0)
    D = np.zeros((5, 5), dtype=complex)
    D[0, 1] = -1j * s
    D[1, 0] = -1j * s * (1 + (1 / s ** 2 if poisson else 0.0))
    D[1, 1] = -4.0 / 3.0 * eta * s * s
    D[1, 4] = -1j * c * s
    D[2, 2] = D[3, 3] = -eta * s * s
    D[4, 1] = -1j * c * s
    D[4, 4] = -alpha * s * s
    return NspSymbol(float(s), D, float(eta), float(alpha))


def nsp_norms(eta, alpha, data, times, grid=RadialGrid(), tol=1e-3):
    """Radially integrated ``n, m, theta`` norms for Gaussian NSP data.

    :param data: macroscopic amplitudes ``(n0, m0_parallel, theta0)``, each
        multiplied by ``e^{-s^2/2}``.
    """
    times = np.asarray(times, dtype=float)
    s = grid.s
    amps = {k: np.empty((s.size, times.size)) for k in NSP_OBSERVABLES}
    for i, si in enumerate(s):
        sym = assemble_nsp(eta, alpha, si)
        d = np.ones(5)
        d[0] = np.sqrt(1 + 1 / si ** 2)
        prop = ModePropagator(sym.matrix, d)
        g = np.exp(-0.5 * si * si)
        u0 = np.array([data[0], data[1], 0, 0, data[2]], dtype=complex) * g
        F = prop.propagate(u0, times)
        amps["density"][i] = np.abs(F[0]) ** 2
        amps["momentum"][i] = np.sum(np.abs(F[1:4]) ** 2, axis=0)
        amps["energy"][i] = np.abs(F[4]) ** 2
    norms, err = _assemble(times, s, amps, NSP_OBSERVABLES)
    res = NormSeries(times, norms, err < tol, err, s)
    if not res.converged:
        raise QualityGateError(f"radial quadrature not converged (rel change {err:.3g})")
    return res


def default_times(t_min=1.0, t_max=1e4, n=60):
    return np.geomspace(t_min, t_max, n)


__all__ = [
    "ModePropagator", "SplitResult", "default_grid", "InitialDataFamily", "RadialGrid", "NormSeries",
    "DecayFit", "NspSymbol", "QualityGateError", "EXPECTED_RATES", "NSP_DATA", "RATE_TOL", "OBSERVABLES", "split_S1_S2",
    "s1_from_eigenfunctions", "s1_moments_closed_form", "fit_sigma0", "observables",
    "radial_integral", "rotation_spot_check", "assemble_physical_norms", "fit_exponent", "decay_fits",
    "assemble_nsp", "nsp_norms", "default_times",
]
