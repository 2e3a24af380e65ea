"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""
import time

import numpy as np
import pytest

from vpbspec.asymptotics import (boltzmann_coefficients, eigenfunction_leading_terms,
                                 extrapolated_intercept, lambda_second_formula,
                                 numerical_second_derivative, validate_expansion, vpb_coefficients)
from vpbspec.collision import assemble_bgk
from vpbspec.dispersion import (ACOUSTIC, continue_all, continue_branch, dense_branch_eigenvalues,
                                empirical_r0, match_dense)
from vpbspec.invariants import run_suite
from vpbspec.semigroup import (EXPECTED_RATES, NSP_DATA, RATE_TOL, InitialDataFamily,
                               ModePropagator, RadialGrid, assemble_physical_norms, decay_fits,
                               default_grid, default_times, fit_sigma0, nsp_norms,
                               s1_from_eigenfunctions, split_S1_S2)
from vpbspec.symbols import assemble_B, spectral_gap_scan
from vpbspec.velocity import build_basis

COEFF_TOL = 1e-10
DENSE_TOL = {"bgk": 1e-8, "spectral": 1e-8, "hard_sphere": 1e-5}
FD_REL_TOL = 0.01
SPLIT_TOL = 1e-10
CONTRACTION_TOL = 1e-10
SLOPE_TOL = 1e-3
INTERCEPT_TOL = 1e-6
ORTHO_TOL = 1e-8
WINDOW = (1e2, 1e4)


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return _report


def _rate_check(fits, expected):
    worst = 0.0
    lines = []
    for name, target in expected.items():
        f = fits[name]
        dev = abs(f.exponent - target)
        worst = max(worst, dev)
        lines.append(f"{name}={f.exponent:+.3f}")
    return worst, " ".join(lines)


def test_01_coefficients(report):
    t0 = time.perf_counter()
    L = assemble_bgk(1.0, build_basis(8))
    c = vpb_coefficients(L)
    b = boltzmann_coefficients(L)
    err = max(abs(c.a0 - 5 / 3), abs(c.a1 - 1 / 3), abs(c.a2 - 1), abs(c.b1 - 7 / 6),
              abs(b.a_pm1 - 1), abs(b.a0 - 1), abs(b.a2 - 1))
    dt = time.perf_counter() - t0
    report(1, err <= COEFF_TOL and dt < 1.0, f"max coefficient error {err:.2e}, {dt:.2f} s")


def test_02_dual_route(report, bgk, spectral, hard_sphere):
    t0 = time.perf_counter()
    worst = {}
    for name, L in (("bgk", bgk), ("spectral", spectral), ("hard_sphere", hard_sphere)):
        r0 = empirical_r0(L)
        grid = np.geomspace(1e-3, r0, 10)
        brs = continue_all(L, grid, with_vectors=False)
        assert all(len(brs[j].samples) == 10 for j in brs), "branch truncated inside [1e-3, r0]"
        worst[name] = max(match_dense([brs[j].samples[k].lam for j in brs],
                                      dense_branch_eigenvalues(L, s))
                          for k, s in enumerate(grid))
    dt = time.perf_counter() - t0
    ok = all(worst[k] <= DENSE_TOL[k] for k in worst) and dt < 60
    report(2, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {dt:.1f} s")


def test_03_expansion(report, bgk, spectral):
    mono = True
    fd_err = 0.0
    for L in (bgk, spectral):
        coeffs = vpb_coefficients(L)
        brs = continue_all(L, [1e-3, 2e-3, 4e-3], with_vectors=False)
        for j, br in brs.items():
            mono &= validate_expansion(br, coeffs).monotone
        ref = lambda_second_formula(L)
        for j in (-1, 0, 1, 2):
            fd = numerical_second_derivative(L, j)
            fd_err = max(fd_err, abs(fd - ref[j]) / abs(ref[j]))
    report(3, mono and fd_err <= FD_REL_TOL,
           f"remainder ratios monotone={mono}, max rel lambda'' error {fd_err:.1e}")


def test_04_invariants(report, bgk, spectral, hard_sphere):
    fails = []
    margin = np.inf
    count = 0
    for name, L in (("bgk", bgk), ("spectral", spectral), ("hard_sphere", hard_sphere)):
        for check, s, val, tol, ok in run_suite(L):
            count += 1
            margin = min(margin, tol / max(val, 1e-300))
            if not ok:
                fails.append(f"{name}:{check}@{s}")
    report(4, not fails, f"{count} checks, {len(fails)} failed, min tol/value {margin:.1e}")


def test_05_spectral_gap(report, bgk, hard_sphere):
    t0 = time.perf_counter()
    grid = np.geomspace(0.5, 20, 40)
    worst = {}
    for name, L in (("bgk", bgk), ("hard_sphere", hard_sphere)):
        rows = spectral_gap_scan(L, grid)
        vals = np.array([r["max_re"] for r in rows])
        assert not any(r["error"] for r in rows)
        worst[name] = float(np.nanmax(vals)) if np.any(np.isfinite(vals)) else -np.inf
    dt = time.perf_counter() - t0
    ok = all(v < 0 for v in worst.values()) and dt < 120
    report(5, ok, ", ".join(f"{k} max Re {v:.3e}" for k, v in worst.items()) + f", {dt:.1f} s")


def test_06_semigroup_split(report, bgk):
    r0 = empirical_r0(bgk)
    fam = InitialDataFamily()
    times = np.linspace(0, 40, 81)
    split_err = contraction = route = 0.0
    sigma = []
    grid = np.geomspace(0.05 * r0, 4 * r0, 12)
    active = grid[grid <= r0]
    brs = continue_all(bgk, np.concatenate([[1e-3], active]))
    for s in grid:
        prop = ModePropagator.from_symbol(assemble_B(bgk, s))
        f0 = fam.vector(bgk.basis, s)
        sp = split_S1_S2(prop, f0, times, s, r0)
        split_err = max(split_err, float(np.max(np.linalg.norm(sp.S1 + sp.S2 - sp.S, axis=0))))
        if sp.active:
            # independent route: S1 from the dispersion eigenfunctions
            k = int(np.searchsorted(active, s)) + 1
            pairs = [(brs[j].samples[k].lam, brs[j].samples[k].psi) for j in sorted(brs)]
            ref = s1_from_eigenfunctions(pairs, 1 / s ** 2, f0, times)
            route = max(route, float(np.max(np.abs(ref - sp.S1)) / np.max(np.abs(sp.S1))))
        n = np.linalg.norm(prop.d[:, None] * sp.S, axis=0)
        contraction = max(contraction, float(np.max(np.diff(n)) / n[0]))
        sigma.append(fit_sigma0(times, np.linalg.norm(prop.d[:, None] * sp.S2, axis=0)))
    ok = (split_err <= SPLIT_TOL and contraction <= CONTRACTION_TOL and min(sigma) > 0
          and route <= 1e-8)
    report(6, ok, f"split {split_err:.1e}, S1 route agreement {route:.1e}, "
                  f"norm growth {contraction:.1e}, "
                  f"min sigma0 {min(sigma):.3f}")


def _vpb_rates(L, tag):
    times = default_times()
    series = assemble_physical_norms(InitialDataFamily(tag), L, times, RadialGrid(1e-3, 20.0, 240))
    return decay_fits(series, WINDOW)


def test_07_vpb_rates(report, bgk):
    t0 = time.perf_counter()
    worst = 0.0
    parts = []
    for tag in ("density_energy", "zero_mean"):
        dev, line = _rate_check(_vpb_rates(bgk, tag), EXPECTED_RATES[("vpb", tag)])
        worst = max(worst, dev)
        parts.append(f"{tag}: {line}")
    dt = time.perf_counter() - t0
    report(7, worst <= RATE_TOL and dt < 600,
           f"max deviation {worst:.3f}, {dt:.0f} s; " + "; ".join(parts))


def test_08_boltzmann(report, bgk):
    s0 = 1e-3
    lam = continue_branch(bgk, 1, [s0], variant="boltzmann", with_vectors=False).lam[0]
    slope_err = abs(lam.imag / s0 - ACOUSTIC)
    times = default_times()
    grid = default_grid(bgk, "boltzmann", times.max())
    series = assemble_physical_norms(InitialDataFamily(), bgk, times, grid, "boltzmann")
    dev, line = _rate_check(decay_fits(series, WINDOW), EXPECTED_RATES[("boltzmann", "density_energy")])
    report(8, slope_err <= SLOPE_TOL and dev <= RATE_TOL,
           f"slope error {slope_err:.1e}, max rate deviation {dev:.3f}; {line}")


def test_09_eps_study(report, bgk):
    err = 0.0
    dist = []
    ac = continue_branch(bgk, 1, [0.1], variant="boltzmann", with_vectors=False).lam[0]
    for eps in (1.0, 2.0, 10.0):
        for j in (-1, 1):
            err = max(err, abs(extrapolated_intercept(bgk, j, eps).imag - j / eps))
        lam = continue_branch(bgk, 1, np.geomspace(1e-3, 0.1, 12), eps, with_vectors=False).lam[-1]
        dist.append(abs(lam - ac))
    monotone = bool(np.all(np.diff(dist) < 0))
    report(9, err <= INTERCEPT_TOL,
           f"max intercept error {err:.1e}; distance to acoustic at s=0.1 "
           + "/".join(f"{d:.3g}" for d in dist) + f" (monotone={monotone})")


def test_10_nsp(report, bgk):
    t0 = time.perf_counter()
    c = vpb_coefficients(bgk)
    times = default_times()
    worst = 0.0
    parts = []
    for name, data in NSP_DATA.items():
        series = nsp_norms(c.a2, c.a0, data, times, RadialGrid(1e-3, 20.0, 240))
        dev, line = _rate_check(decay_fits(series, WINDOW), EXPECTED_RATES[("nsp", name)])
        worst = max(worst, dev)
        parts.append(f"{name}: {line}")
    dt = time.perf_counter() - t0
    report(10, worst <= RATE_TOL and dt < 60,
           f"max deviation {worst:.3f}, {dt:.1f} s; " + "; ".join(parts))


def test_11_orthonormality(report, bgk):
    r0 = empirical_r0(bgk)
    sel = sorted({0.02, 0.05, r0 / 2})
    brs = continue_all(bgk, sel)
    worst = 0.0
    for k, s in enumerate(sel):
        psi = np.array([brs[j].samples[k].psi for j in sorted(brs)])
        gram = psi @ psi.T + np.outer(psi[:, 0], psi[:, 0]) / s ** 2
        worst = max(worst, float(np.max(np.abs(gram - np.eye(5)))))
    small = continue_all(bgk, [1e-3, 2e-3, 4e-3, 8e-3])
    tabs = {j: eigenfunction_leading_terms(bgk, small[j]) for j in small}
    converging = all(t.converging for t in tabs.values())
    overlap = max(abs(tabs[j].overlap0[0] - 1) for j in tabs)
    c0 = tabs[0].chi0_over_s2[0].real
    lead_ok = converging and overlap < 1e-3 and abs(c0 + np.sqrt(2 / 3)) < 1e-2
    report(11, worst <= ORTHO_TOL and lead_ok,
           f"orthonormality defect {worst:.1e}; leading terms converging={converging}, "
           f"overlap defect {overlap:.1e}, (psi_02, sqrt M) {c0:.5f}")
