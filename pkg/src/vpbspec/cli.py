"""Command-line driver: ``vpbspec <command> [--config PATH] [--out DIR] ...``.

Every command writes CSV tables (first column: config hash) and a
``summary.json`` into the output directory. Exit codes: 0 success, 2 config
error, 3 numerical-quality gate failure, 4 acceptance failure under ``--check``.
"""
import argparse
import csv
import dataclasses
import json
import math
import os
import platform
import sys

import numpy as np
import scipy
import yaml

from . import __version__, kernels
from .asymptotics import (boltzmann_coefficients, extrapolated_intercept, relaxation_closed_forms,
                          validate_expansion, vpb_coefficients)
from .collision import ConditioningError, assemble_model, default_rate
from .config import ConfigError, RunConfig, load_config
from .dispersion import (ACOUSTIC, BranchError, continue_all, continue_branch, det_D, det_D0,
                         dense_branch_eigenvalues, eigenvalue_condition, empirical_r0)
from .invariants import run_suite
from .semigroup import (EXPECTED_RATES, NSP_DATA, NSP_OBSERVABLES, RATE_TOL, InitialDataFamily,
                        QualityGateError, RadialGrid, assemble_physical_norms, decay_fits,
                        default_grid, default_times, nsp_norms, rotation_spot_check)
from .symbols import spectral_gap_scan
from .velocity import BasisError, build_basis

EXIT_OK, EXIT_CONFIG, EXIT_QUALITY, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("coeffs", "branches", "dispersion", "spectrum-scan", "decay", "nsp", "check")
DENSE_TOL = {"hard_sphere": 1e-5}
DENSE_TOL_DEFAULT = 1e-8
COEFF_TOL = 1e-10
INTERCEPT_TOL = 1e-6
ORTHO_TOL = 1e-8
SLOPE_TOL = 1e-3
# relative K -> K-2 change below which a model without an oracle counts as converged
CONVERGENCE_TOL = 0.05
EXPANSION_S = (4e-3, 2e-3, 1e-3)


class Bundle:
    """Tables, scalar results and acceptance checks of one command."""

    def __init__(self, command):
        self.command = command
        self.tables = {}
        self.results = {}
        self.checks = []

    def table(self, name, header):
        self.tables[name] = (list(header), [])
        return self.tables[name][1]

    def check(self, name, value, tol, passed=None):
        ok = bool(value <= tol) if passed is None else bool(passed)
        self.checks.append({"name": name, "value": float(value), "tolerance": float(tol),
                            "passed": ok})

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)


# --------------------------------------------------------------------------
# serialization

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


def provenance(cfg):
    return {"config_hash": cfg.hash, "vpbspec": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "pyyaml": yaml.__version__,
            "python": platform.python_version(), "kernel_backend": kernels.BACKEND}


def write_bundle(bundle, cfg, out_dir):
    """Write ``<table>.csv`` files, ``summary.json`` and the effective ``config.yaml``."""
    os.makedirs(out_dir, exist_ok=True)
    h = cfg.hash
    for name, (header, rows) in bundle.tables.items():
        with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["config_hash"] + header)
            for row in rows:
                w.writerow([h] + [_fmt(x) for x in row])
    summary = {"command": bundle.command, "provenance": provenance(cfg),
               "config": cfg.to_dict(), "results": bundle.results, "checks": bundle.checks,
               "all_checks_passed": bundle.passed, "tables": sorted(bundle.tables)}
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_yaml())


# --------------------------------------------------------------------------
# shared setup

def build_model(cfg):
    """Collision matrix of the configured model (basis errors surface as config errors)."""
    m = cfg.model
    try:
        basis = build_basis(m.K)
        return assemble_model(m.tag, basis, m.nu0, m.rates, m.quadrature_scale, m.cache_dir)
    except BasisError as exc:
        raise ConfigError(f"model.K: {exc}") from exc


def _oracle(cfg):
    """Closed-form coefficient sets for relaxation models, else ``None``."""
    m = cfg.model
    if m.tag == "bgk":
        return relaxation_closed_forms(m.nu0, m.nu0)
    if m.tag == "spectral_relaxation":
        rates = {k.replace(" ", ""): v for k, v in m.rates.items()}
        mu22 = rates.get("2,2", default_rate(2, 2))
        mu31 = rates.get("3,1", default_rate(3, 1))
        return relaxation_closed_forms(mu22, mu31)
    return None


def _s_grid(cfg, L):
    g = cfg.s_grid
    r0 = g.s_max or empirical_r0(L, cfg.eps, cfg.variant)
    return np.geomspace(g.s_min, r0, g.n), r0


# --------------------------------------------------------------------------
# commands

def cmd_coeffs(cfg):
    L = build_model(cfg)
    b = Bundle("coeffs")
    vpb = vpb_coefficients(L)
    bz = boltzmann_coefficients(L)
    oracle = _oracle(cfg)
    ref = None
    if oracle is None and cfg.model.K - 2 >= 2:
        ref = cfg.replace(model=_with_K(cfg.model, cfg.model.K - 2))
        Lr = build_model(ref)
        ref = (vpb_coefficients(Lr), boltzmann_coefficients(Lr))
    rows = b.table("coeffs", ["model", "K", "generator", "name", "value", "oracle", "abs_error",
                              "value_K_minus_2", "rel_change", "converged"])
    entries = [("vpb", n, getattr(vpb, n), oracle and getattr(oracle[0], n),
                ref and getattr(ref[0], n)) for n in ("a0", "a1", "a2", "b1")]
    entries += [("boltzmann", n, getattr(bz, n), oracle and getattr(oracle[1], n),
                 ref and getattr(ref[1], n)) for n in ("a_pm1", "a0", "a2")]
    for gen, name, val, orc, rv in entries:
        err = abs(val - orc) if orc is not None else np.nan
        rel = abs(val - rv) / abs(val) if rv is not None else np.nan
        rows.append([cfg.model.tag, cfg.model.K, gen, name, val,
                     np.nan if orc is None else orc, err, np.nan if rv is None else rv, rel,
                     bool(rel < CONVERGENCE_TOL) if rv is not None else orc is not None])
        if orc is not None:
            b.check(f"coeff_{gen}_{name}", err, COEFF_TOL)
    lrows = b.table("lambda_second", ["j", "re", "im"])
    for j, v in sorted(vpb.lambda_second.items()):
        lrows.append([j, v.real, v.imag])
    b.results.update({"mu": L.mu, "nu0": L.nu0, "diagnostics": L.diagnostics,
                      "has_oracle": oracle is not None})
    return b


def _with_K(model, K):
    return dataclasses.replace(model, K=K)


def _dense_tol(cfg):
    return DENSE_TOL.get(cfg.model.tag, DENSE_TOL_DEFAULT)


def _check_branches(branches):
    for j, br in branches.items():
        if br.truncated:
            raise QualityGateError(f"branch {j} truncated at s = {br.s[-1]:.6g}")


def cmd_branches(cfg):
    L = build_model(cfg)
    b = Bundle("branches")
    grid, r0 = _s_grid(cfg, L)
    eps, variant = cfg.eps, cfg.variant
    branches = continue_all(L, grid, eps, variant, with_vectors=True)
    _check_branches(branches)
    rows = b.table("branches", ["variant", "eps", "j", "s", "re", "im", "residual", "method",
                                "dense_abs_error"])
    worst = 0.0
    for k, s in enumerate(grid):
        dense = dense_branch_eigenvalues(L, s, eps, variant)
        for j in sorted(branches):
            smp = branches[j].samples[k]
            err = float(np.min(np.abs(dense - smp.lam)))
            worst = max(worst, err)
            rows.append([variant, eps, j, s, smp.lam.real, smp.lam.imag, smp.residual,
                         smp.method, err])
    b.check("dual_route", worst, _dense_tol(cfg))

    # expansion validation at small s
    coeffs = vpb_coefficients(L) if variant == "vpb" else boltzmann_coefficients(L)
    erows = b.table("expansion", ["j", "s", "remainder", "ratio"])
    small = continue_all(L, sorted(EXPANSION_S), eps, variant, with_vectors=False)
    for j in sorted(small):
        rep = validate_expansion(small[j], coeffs, eps)
        for s, r, q in zip(rep.s, rep.remainder, rep.ratio):
            erows.append([j, s, r, q])
        b.check(f"expansion_monotone_j{j}", 0.0, 0.0, rep.monotone)
        b.check(f"expansion_leading_j{j}", 0.0, 0.0, rep.leading_check)

    # orthonormality of the eigenfunctions
    orows = b.table("orthonormality", ["s", "max_defect"])
    sel = sorted({0.02, 0.05, r0 / 2})
    sel_br = continue_all(L, sel, eps, variant, with_vectors=True)
    worst_o = 0.0
    for k, s in enumerate(sel):
        w = 1.0 / (eps * s) ** 2 if variant == "vpb" else 0.0
        keys = sorted(sel_br)
        psi = np.array([sel_br[j].samples[k].psi for j in keys])
        gram = psi @ psi.T + w * np.outer(psi[:, 0], psi[:, 0])
        d = float(np.max(np.abs(gram - np.eye(len(keys)))))
        worst_o = max(worst_o, d)
        orows.append([s, d])
    b.check("orthonormality", worst_o, ORTHO_TOL)

    if variant == "boltzmann":
        s0 = min(EXPANSION_S)
        slope = small[1].lam[np.argmin(small[1].s)].imag / s0
        b.results["acoustic_slope"] = slope
        b.check("acoustic_slope", abs(slope - ACOUSTIC), SLOPE_TOL)
    else:
        _eps_study(cfg, L, b)
    b.results.update({"r0": r0, "mu": L.mu})
    return b


def _eps_study(cfg, L, b):
    rows = b.table("eps_study", ["eps", "j", "intercept_re", "intercept_im", "target_im",
                                 "abs_error", "distance_to_acoustic"])
    s_ref = 0.1
    ac = continue_branch(L, 1, [s_ref], 1.0, "boltzmann", with_vectors=False).lam[0]
    dists = []
    worst = 0.0
    for eps in cfg.eps_sweep:
        lam_ref = continue_branch(L, 1, np.geomspace(1e-3, s_ref, 12), eps, "vpb",
                                  with_vectors=False).lam[-1]
        dist = abs(lam_ref - ac)
        dists.append((eps, dist))
        for j in (-1, 1):
            z = extrapolated_intercept(L, j, eps)
            err = abs(z - 1j * j / eps)
            worst = max(worst, err)
            rows.append([eps, j, z.real, z.imag, j / eps, err, dist])
    b.check("eps_intercepts", worst, INTERCEPT_TOL)
    dists.sort()
    b.results["eps_monotone_to_acoustic"] = bool(all(
        d2 < d1 for (_, d1), (_, d2) in zip(dists, dists[1:])))


def cmd_dispersion(cfg):
    L = build_model(cfg)
    b = Bundle("dispersion")
    grid, r0 = _s_grid(cfg, L)
    eps, variant = cfg.eps, cfg.variant
    branches = continue_all(L, grid, eps, variant, with_vectors=False)
    _check_branches(branches)
    rows = b.table("dispersion", ["variant", "eps", "j", "s", "re", "im", "abs_det", "method",
                                  "condition"])
    worst_cond = 0.0
    for j in sorted(branches):
        for smp in branches[j].samples:
            if j in (2, 3):
                d = det_D0(L, smp.lam, smp.s)
            else:
                d = det_D(L, smp.lam, smp.s, eps, variant)
            cond = eigenvalue_condition(L, smp.s, smp.lam, eps, variant)
            worst_cond = max(worst_cond, cond)
            rows.append([variant, eps, j, smp.s, smp.lam.real, smp.lam.imag, abs(d),
                         smp.method, cond])
    b.results.update({"r0": r0, "max_condition": worst_cond})
    return b


def cmd_spectrum_scan(cfg):
    L = build_model(cfg)
    b = Bundle("spectrum-scan")
    sc = cfg.scan
    grid = np.geomspace(sc.s_min, sc.s_max, sc.n)
    res = spectral_gap_scan(L, grid, cfg.eps, sc.delta_frac * L.mu, cfg.variant)
    rows = b.table("spectrum_scan", ["s", "max_re", "max_re_all", "count"])
    for r in res:
        if r["error"]:
            raise QualityGateError(f"eigensolve failed at s = {r['s']}: {r['error']}")
        rows.append([r["s"], r["max_re"], r["max_re_all"], r.get("count", 0)])
    top = [r["max_re"] for r in res if np.isfinite(r["max_re"])]
    worst = max(top) if top else -np.inf
    b.results.update({"max_re": worst, "mu": L.mu, "delta": sc.delta_frac * L.mu})
    b.check("spectral_gap", worst, 0.0, passed=worst < 0)
    return b


def _family(cfg):
    f = cfg.family
    return InitialDataFamily(f.tag, f.d0, f.d1, f.r0, tuple(f.coeffs))


def _emit_fits(b, fits, generator, family, expected, series):
    rows = b.tables["decay_fits"][1]
    for name in sorted(fits):
        fit = fits[name]
        exp = expected.get(name, np.nan)
        dev = abs(fit.exponent - exp) if np.isfinite(exp) else np.nan
        rows.append([generator, family, name, fit.exponent, fit.stderr, fit.band[0], fit.band[1],
                     fit.window[0], fit.window[1], fit.residual, fit.flagged, fit.converged,
                     series.convergence_error, exp, dev])
        if np.isfinite(exp):
            b.check(f"rate_{generator}_{family}_{name}", dev, RATE_TOL)
    nrows = b.tables["decay_norms"][1]
    for name in sorted(series.norms):
        for t, v in zip(series.times, series.norms[name]):
            nrows.append([generator, family, name, t, v])


def _decay_tables(b):
    if "decay_fits" not in b.tables:
        b.table("decay_fits", ["generator", "family", "observable", "exponent", "stderr",
                               "band_lo", "band_hi", "window_lo", "window_hi", "residual",
                               "flagged", "converged", "convergence_error", "expected",
                               "abs_deviation"])
        b.table("decay_norms", ["generator", "family", "observable", "t", "norm"])


def cmd_decay(cfg, threads=1):
    L = build_model(cfg)
    b = Bundle("decay")
    _decay_tables(b)
    tg = cfg.time_grid
    times = default_times(tg.t_min, tg.t_max, tg.n)
    fam = _family(cfg)
    r = cfg.radial
    spot = rotation_spot_check(fam, L, 0.3, times[:5], 3, cfg.seed)
    b.results["rotation_spot_check"] = spot
    b.check("rotation_spot_check", spot, 1e-8)
    for variant in cfg.decay.variants:
        if variant == "vpb":
            grid = RadialGrid(r.s_min, r.s_max, r.n)
        else:
            grid = default_grid(L, variant, tg.t_max, r.s_min, r.s_max, r.n)
        series = assemble_physical_norms(fam, L, times, grid, variant, cfg.eps, threads=threads)
        fits = decay_fits(series, tuple(tg.fit_window))
        _emit_fits(b, fits, variant, fam.tag, EXPECTED_RATES.get((variant, fam.tag), {}), series)
        b.results[f"{variant}_diagnostics"] = series.diagnostics
    if cfg.decay.nsp:
        _nsp(cfg, L, b, times)
    return b


def _nsp(cfg, L, b, times):
    _decay_tables(b)
    co = vpb_coefficients(L)
    r = cfg.radial
    grid = RadialGrid(r.s_min, r.s_max, r.n)
    for name, data in NSP_DATA.items():
        series = nsp_norms(co.a2, co.a0, data, times, grid)
        fits = decay_fits(series, tuple(cfg.time_grid.fit_window))
        _emit_fits(b, fits, "nsp", name, EXPECTED_RATES[("nsp", name)], series)
    b.results.update({"nsp_eta": co.a2, "nsp_alpha": co.a0,
                      "nsp_observables": list(NSP_OBSERVABLES)})


def cmd_nsp(cfg):
    L = build_model(cfg)
    b = Bundle("nsp")
    tg = cfg.time_grid
    _nsp(cfg, L, b, default_times(tg.t_min, tg.t_max, tg.n))
    return b


def cmd_check(cfg):
    L = build_model(cfg)
    b = Bundle("check")
    rows = b.table("invariants", ["name", "s", "value", "tolerance", "passed"])
    for name, s, val, tol, ok in run_suite(L, eps=cfg.eps):
        rows.append([name, s, val, tol, ok])
        b.check(f"{name}" + ("" if np.isnan(s) else f"@{s:g}"), val, tol, ok)
    oracle = _oracle(cfg)
    if oracle is not None:
        vpb = vpb_coefficients(L)
        bz = boltzmann_coefficients(L)
        err = max(max(abs(getattr(vpb, n) - getattr(oracle[0], n)) for n in ("a0", "a1", "a2", "b1")),
                  max(abs(getattr(bz, n) - getattr(oracle[1], n)) for n in ("a_pm1", "a0", "a2")))
        b.check("coefficients", err, COEFF_TOL)
    b.results["mu"] = L.mu
    return b


# --------------------------------------------------------------------------
# entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads")
    common.add_argument("--check", action="store_true",
                        help="exit 4 when an acceptance tolerance is violated")
    common.add_argument("--seed", type=int, metavar="U64", help="seed for randomized checks")
    p = argparse.ArgumentParser(prog="vpbspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def run(command, cfg):
    """Run one command and return its :class:`Bundle`."""
    if command == "decay":
        return cmd_decay(cfg, threads=cfg.threads)
    table = {"coeffs": cmd_coeffs, "branches": cmd_branches, "dispersion": cmd_dispersion,
             "spectrum-scan": cmd_spectrum_scan, "nsp": cmd_nsp, "check": cmd_check}
    return table[command](cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        bundle = run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QualityGateError, ConditioningError, BranchError) as exc:
        print(f"numerical quality gate failed: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    write_bundle(bundle, cfg, cfg.out)
    for c in bundle.checks:
        if not c["passed"]:
            print(f"FAIL {c['name']}: {c['value']:.3g} > {c['tolerance']:.3g}", file=sys.stderr)
    if (args.check or args.command == "check") and not bundle.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
