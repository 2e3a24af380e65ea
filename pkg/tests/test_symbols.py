import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from vpbspec.collision import ConditioningError, solve_micro
from vpbspec.symbols import (Resolvent, acoustic_eigenvalues, acoustic_gram, assemble_A,
                             assemble_B, assemble_E, assemble_symbol, resolvent_R,
                             spectral_gap_scan)
from vpbspec.velocity import multiplication_matrix, projections


def _match(a, b):
    b = list(b)
    err = 0.0
    for z in a:
        k = int(np.argmin([abs(z - x) for x in b]))
        err = max(err, abs(z - b.pop(k)))
    return err


def _unit(rng):
    w = rng.standard_normal(3)
    return w / np.linalg.norm(w)


def test_B_formula(bgk, basis8, rng):
    om = _unit(rng)
    s, eps = 0.37, 1.7
    V = multiplication_matrix(basis8, om)
    Pd = projections(basis8).Pd
    ref = bgk.matrix - 1j * s * V - 1j / (eps ** 2 * s) * V @ Pd
    assert_allclose(assemble_B(bgk, s, om, eps).matrix, ref, atol=1e-14)
    assert_allclose(assemble_E(bgk, s, om).matrix, bgk.matrix - 1j * s * V, atol=1e-14)
    with pytest.raises(ValueError):
        assemble_B(bgk, 0.0)
    with pytest.raises(ValueError):
        assemble_symbol(bgk, 1.0, "euler")


def test_macro_block_is_acoustic(bgk, basis8):
    chi = basis8.chi
    for s in (0.1, 1.0, 3.0):
        assert_allclose(chi @ assemble_B(bgk, s).matrix @ chi.T, assemble_A(s), atol=1e-14)


def test_five_branch_points_at_small_s(bgk):
    w = assemble_B(bgk, 0.05).eigvals()
    top = w[w.real > -bgk.mu / 2]
    assert top.size == 5
    assert _match(top, [-1j, 0, 0, 0, 1j]) < 0.02


def test_shear_quadratic_form(bgk, basis8):
    sym = assemble_B(bgk, 1.0)
    f = basis8.chi[2]
    val = sym.metric.inner(sym.matrix @ f, f)
    assert abs(val.real) < 1e-15


def test_eps_branches(bgk):
    w = assemble_B(bgk, 1e-3, eps=2.0).eigvals()
    top = w[np.argsort(-w.real)][:5]
    assert _match(top, [-0.5j, 0, 0, 0, 0.5j]) < 1e-4


def test_boltzmann_symbol(bgk, basis8):
    w = assemble_E(bgk, 0.0).eigvals()
    assert np.sum(np.abs(w) < 1e-12) == 5
    s = 0.05
    w = assemble_E(bgk, s).eigvals()
    top = w[np.argsort(-w.real)][:5]
    c = np.sqrt(5.0 / 3.0) * s
    assert_allclose(np.sort(top.imag), [-c, 0, 0, 0, c], atol=5e-3 * s)
    assert _match(w, np.conj(w)) < 1e-10


def test_acoustic_matrix():
    for s in (0.2, 1.0, 4.0):
        assert _match(np.linalg.eigvals(assemble_A(s)), acoustic_eigenvalues(s)) < 1e-12
        G = acoustic_gram(s)
        iA = 1j * assemble_A(s)
        assert np.linalg.norm(G @ iA - iA.conj().T @ G) <= 1e-12
    assert_allclose(acoustic_eigenvalues(1.0)[[0, 4]], [-1j * np.sqrt(8 / 3), 1j * np.sqrt(8 / 3)])


def test_resolvent(bgk, spectral, basis8, rng):
    P1 = projections(basis8).P1
    g = P1 @ rng.standard_normal(basis8.dimension)
    for lam in (0.2, 1j, -0.4 + 0.3j):
        assert_allclose(resolvent_R(bgk, lam, 0.0, g), g / (-1.0 - lam), atol=1e-13)
    assert_allclose(resolvent_R(spectral, 0, 0.0, g), solve_micro(spectral, 0, g), atol=1e-13)
    for lam, s in ((0.1, 0.5), (-0.5 + 2j, 2.0), (0.0, 3.0)):
        x = Resolvent(spectral, lam, s)(g)
        assert np.linalg.norm(x) <= np.linalg.norm(g) / (lam.real + spectral.mu) * (1 + 1e-12) \
            if isinstance(lam, complex) else np.linalg.norm(x) <= np.linalg.norm(g) / (lam + spectral.mu) * (1 + 1e-12)
    with pytest.raises(ConditioningError):
        Resolvent(spectral, -2.0, 0.5)
    with pytest.raises(ValueError):
        Resolvent(spectral, 0.1, 0.5)(basis8.chi[0])


def test_spectral_gap_scan(bgk):
    rows = spectral_gap_scan(bgk, np.geomspace(0.5, 20, 40))
    vals = np.array([r["max_re"] for r in rows])
    assert np.all(vals[np.isfinite(vals)] < 0)
    assert all(r["error"] == "" for r in rows)
    # continuity smoke check on adjacent points
    allre = np.array([r["max_re_all"] for r in rows])
    s = np.array([r["s"] for r in rows])
    assert np.all(np.abs(np.diff(allre)) < 10 * np.diff(s))
    w = assemble_B(bgk, 50.0).eigvals()
    assert w.real.max() >= -bgk.nu0 - 1e-12


@pytest.mark.parametrize("model", ["bgk", "spectral", "hard_sphere"])
def test_symbol_invariants(model, request, rng):
    L = request.getfixturevalue(model)
    for s in (0.05, 0.5, 2.0):
        sym = assemble_B(L, s)
        w = sym.eigvals()
        scale = max(1.0, np.abs(w).max())
        # rotation invariance
        assert _match(assemble_B(L, s, _unit(rng)).eigvals(), w) <= 1e-10 * scale
        # conjugation symmetry
        assert _match(w, np.conj(w)) <= 1e-10 * scale
        # weighted adjoint identity
        g = sym.gram_sqrt ** 2
        adj = (sym.matrix.conj().T * g[None, :]) / g[:, None]
        assert np.linalg.norm(adj - assemble_B(L, -s).matrix) <= 1e-10 * np.linalg.norm(sym.matrix)
        # weighted dissipativity on 1000 random vectors
        F = rng.standard_normal((1000, L.dimension)) + 1j * rng.standard_normal((1000, L.dimension))
        F /= np.linalg.norm(F, axis=1)[:, None]
        BF = F @ sym.matrix.T
        re = np.real(np.sum(BF * np.conj(F) * g[None, :], axis=1))
        assert re.max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 30.0), st.floats(0.2, 10.0))
def test_symmetrized_symbol_structure(s, eps):
    from vpbspec.collision import assemble_bgk
    from vpbspec.velocity import build_basis
    L = assemble_bgk(1.0, build_basis(4))
    S = assemble_B(L, s, eps=eps).symmetrized()
    # L - iH with H real symmetric: complex symmetric, Hermitian part = L
    assert np.linalg.norm(S - S.T) <= 1e-12 * np.linalg.norm(S)
    assert np.linalg.norm(0.5 * (S + S.conj().T) - L.matrix) <= 1e-12 * np.linalg.norm(S)
