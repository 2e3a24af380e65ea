import numpy as np
import pytest
from numpy.testing import assert_allclose

from vpbspec.dispersion import continue_all, empirical_r0
from vpbspec.semigroup import (InitialDataFamily, ModePropagator, QualityGateError, RadialGrid,
                               assemble_nsp, assemble_physical_norms, fit_exponent, fit_sigma0,
                               nsp_norms, observables, radial_integral, rotation_spot_check,
                               s1_from_eigenfunctions, s1_moments_closed_form, split_S1_S2)
from vpbspec.symbols import acoustic_gram, assemble_A, assemble_B
from vpbspec.velocity import projections

TIMES = np.array([0.0, 0.3, 1.0, 4.0, 20.0])


def _wnorm(prop, F):
    return np.linalg.norm(prop.d[:, None] * F, axis=0)


def test_identity_and_contraction(bgk, rng):
    f0 = rng.standard_normal(bgk.dimension) + 1j * rng.standard_normal(bgk.dimension)
    for s in (0.01, 0.4, 3.0):
        prop = ModePropagator.from_symbol(assemble_B(bgk, s))
        F = prop.propagate(f0, TIMES)
        assert np.array_equal(F[:, 0], f0.astype(complex))
        n = _wnorm(prop, F)
        assert np.all(np.diff(n) <= 1e-10 * n[0])
        assert prop.reconstruction < 1e-10
    with pytest.raises(ValueError):
        prop.propagate(f0, [-1.0])


def test_micro_decay_bgk(bgk, basis8, rng):
    g = projections(basis8).P1 @ rng.standard_normal(basis8.dimension)
    F = ModePropagator(bgk.matrix).propagate(g, TIMES)
    assert_allclose(F, np.outer(g, np.exp(-TIMES)), atol=1e-12)


def test_acoustic_flow_unitary(rng):
    s = 0.6
    d = np.sqrt(np.diag(acoustic_gram(s)))
    prop = ModePropagator(assemble_A(s), d)
    u = rng.standard_normal(5)
    n = _wnorm(prop, prop.propagate(u, TIMES))
    assert_allclose(n, n[0], rtol=1e-12)


def test_expm_fallback_agrees(bgk6, rng):
    f0 = rng.standard_normal(bgk6.dimension)
    sym = assemble_B(bgk6, 0.3)
    a = ModePropagator.from_symbol(sym).propagate(f0, TIMES)
    prop = ModePropagator.from_symbol(sym, cond_max=0.0)
    assert prop.use_expm
    assert_allclose(prop.propagate(f0, TIMES), a, atol=1e-10)
    with pytest.raises(QualityGateError):
        prop.spectral_projector([0])


def test_split(bgk):
    r0 = empirical_r0(bgk)
    fam = InitialDataFamily()
    for s in (0.05, 0.5 * r0):
        prop = ModePropagator.from_symbol(assemble_B(bgk, s))
        sp = split_S1_S2(prop, fam.vector(bgk.basis, s), TIMES, s, r0)
        assert sp.active and sp.projector_defect < 1e-10
        assert np.max(np.abs(sp.S1 + sp.S2 - sp.S)) < 1e-12
    sp = split_S1_S2(prop, fam.vector(bgk.basis, 2 * r0), TIMES, 2 * r0, r0)
    assert not sp.active and not np.any(sp.S1)


def test_S1_matches_eigenfunction_sum(bgk):
    fam = InitialDataFamily()
    for s in (0.02, 0.2):
        prop = ModePropagator.from_symbol(assemble_B(bgk, s))
        f0 = fam.vector(bgk.basis, s)
        sp = split_S1_S2(prop, f0, TIMES, s, 1.0)
        brs = continue_all(bgk, [s])
        pairs = [(brs[j].samples[0].lam, brs[j].samples[0].psi) for j in sorted(brs)]
        ref = s1_from_eigenfunctions(pairs, 1 / s ** 2, f0, TIMES)
        assert np.max(np.abs(ref - sp.S1)) <= 1e-10 * np.max(np.abs(sp.S1))
        # an eigenmode lives entirely in S1
        lam, psi = pairs[1]
        sp = split_S1_S2(prop, psi, TIMES, s, 1.0)
        assert np.max(np.abs(sp.S2)) < 1e-10


def test_sigma0_positive_across_r0(bgk):
    r0 = empirical_r0(bgk)
    fam = InitialDataFamily()
    t = np.linspace(0, 40, 41)
    for s in (0.3 * r0, 0.9 * r0, 1.5 * r0, 3 * r0):
        prop = ModePropagator.from_symbol(assemble_B(bgk, s))
        sp = split_S1_S2(prop, fam.vector(bgk.basis, s), t, s, r0)
        assert fit_sigma0(t, _wnorm(prop, sp.S2)) > 0
    assert_allclose(fit_sigma0(t, 3 * np.exp(-0.4 * t)), 0.4)
    with pytest.raises(ValueError):
        fit_sigma0(t, np.zeros_like(t))


def test_closed_form_moments(bgk, basis8):
    fam = InitialDataFamily()
    disc = []
    for s in (0.005, 0.01, 0.02):
        prop = ModePropagator.from_symbol(assemble_B(bgk, s))
        f0 = fam.vector(basis8, s)
        S1 = split_S1_S2(prop, f0, TIMES, s, 1.0).S1
        brs = continue_all(bgk, [s], with_vectors=False)
        lams = {j: brs[j].samples[0].lam for j in brs}
        c = fam.macro(s)
        err = 0.0
        for k, t in enumerate(TIMES):
            n, m, q = s1_moments_closed_form(lams, c[0], c[1:4], c[4], t, s)
            col = S1[:, k]
            err = max(err, abs(n - col[0]), np.max(np.abs(m - col[1:4])),
                      abs(q - basis8.chi[4] @ col))
        disc.append(err / s)
    # discrepancy is first order in s
    assert max(disc) < 5.0
    assert max(disc) / min(disc) < 1.5
    n, m, q = s1_moments_closed_form({j: -0.1 + 0j for j in (-1, 0, 1, 2, 3)}, 0, np.zeros(3), 0,
                                     1.0, 0.1)
    assert n == 0 and not np.any(m) and q == 0


def test_initial_data_families(basis8):
    z = InitialDataFamily("zero_mean")
    for s in (0.0, 0.3):
        assert z.macro(s)[0] == 0.0
    om = np.array([0.0, 0.6, 0.8])
    v = z.vector(basis8, 0.3, om)
    assert_allclose(basis8.chi[1:4] @ v, om * z.macro(0.3)[1])
    de = InitialDataFamily(d0=2.0, d1=0.5, r0=0.0)
    assert_allclose(de.macro(0.0), [2, 0, 0, 0, 1])
    cu = InitialDataFamily("custom", coeffs=(1.0, 2.0))
    assert_allclose(cu.macro(0.0), [1, 2, 0, 0, 0])
    with pytest.raises(ValueError):
        InitialDataFamily("gaussian")


def test_observables_definitions(basis8, rng):
    F = rng.standard_normal((basis8.dimension, 3)) + 0j
    o = observables(basis8, F, 0.5, 4.0)
    assert_allclose(o["efield"], 4 * np.abs(F[0]) ** 2)
    assert_allclose(o["hp_norm"], np.sum(np.abs(F) ** 2, axis=0) + o["efield"])
    assert set(observables(basis8, F, 0.5, 0.0, ("density",))) == {"density"}


def test_rotation_spot_check(bgk6):
    for tag in ("density_energy", "zero_mean"):
        assert rotation_spot_check(InitialDataFamily(tag), bgk6, 0.4, TIMES) < 1e-10
    assert rotation_spot_check(InitialDataFamily(), bgk6, 0.4, TIMES, variant="boltzmann") < 1e-10


def test_radial_integral_gaussian():
    g = RadialGrid(1e-3, 12.0, 200)
    s = g.s
    val = radial_integral(s, np.exp(-s * s))
    assert_allclose(val, np.pi ** 1.5, rtol=1e-9)
    # s^-2 behaviour near zero is captured by the tail term
    val = radial_integral(s, np.exp(-s * s) / s ** 2)
    assert_allclose(val, 2 * np.pi ** 1.5, rtol=1e-6)


def test_radial_grid_oscillation_cap():
    g = RadialGrid(1e-5, 20.0, 240, speed=1.0, t_max=1e4, damping=1.0)
    b = g.base
    assert np.all(np.diff(b) > 0) and b[-1] == 20.0
    t_eff = np.minimum(1e4, 12.0 / b[:-1] ** 2)
    assert np.all(np.diff(b) * t_eff <= 0.8 + 1e-12)
    assert g.s.size == 2 * b.size - 1
    with pytest.raises(ValueError):
        RadialGrid(1.0, 0.5)


def test_physical_norms_small_grid(bgk6):
    times = np.geomspace(1, 50, 12)
    grid = RadialGrid(1e-3, 12.0, 160)
    a = assemble_physical_norms(InitialDataFamily(), bgk6, times, grid)
    b = assemble_physical_norms(InitialDataFamily(), bgk6, times, grid, threads=2)
    for k in a.norms:
        assert np.array_equal(a.norms[k], b.norms[k])
    assert a.converged and a.diagnostics["max_real_eig"] <= 1e-12
    with pytest.raises(QualityGateError):
        assemble_physical_norms(InitialDataFamily(), bgk6, times, RadialGrid(1e-3, 12.0, 6))


def test_fit_exponent():
    t = np.geomspace(1, 1e4, 60)
    fit = fit_exponent(t, 2.0 * (1 + t) ** -0.75)
    assert abs(fit.exponent + 0.75) < 1e-6 and not fit.flagged
    osc = fit_exponent(t, (1 + t) ** -0.75 * (1.5 + np.sin(t)))
    assert abs(osc.exponent + 0.75) < 3 * osc.stderr and not osc.flagged
    assert fit_exponent(t, np.exp(-t / 300)).flagged
    with pytest.raises(ValueError):
        fit_exponent(t[:20], (1 + t[:20]) ** -1.0)
    lo, hi = fit.band
    assert lo <= fit.exponent <= hi


def test_nsp_symbol():
    s = 0.4
    sym = assemble_nsp(0.0, 0.0, s)
    assert_allclose(sym.matrix, assemble_A(s), atol=1e-15)
    D = assemble_nsp(1.0, 5 / 3, s).matrix
    assert_allclose(np.diag(D).real, [0, -4 / 3 * s * s, -s * s, -s * s, -5 / 3 * s * s])
    w = np.linalg.eigvals(D)
    assert w.real.max() <= 1e-14
    assert assemble_nsp(1.0, 1.0, s, poisson=False).matrix[1, 0] == -1j * s
    with pytest.raises(ValueError):
        assemble_nsp(1.0, 1.0, 0.0)


def test_nsp_norms_short():
    times = np.geomspace(1, 50, 12)
    r = nsp_norms(1.0, 5 / 3, (1.0, 0.0, 1.0), times, RadialGrid(1e-3, 12.0, 120))
    assert r.converged
    for k in ("density", "momentum", "energy"):
        assert r.norms[k][-1] < r.norms[k][0]
