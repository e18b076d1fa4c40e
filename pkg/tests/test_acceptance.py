"""Acceptance criteria 1-11, one test each, at the stated tolerances and time budgets."""
import math
import time

import numpy as np
import pytest

from polarizon import greenfn as gf
from polarizon import noisecurrent as nc
from polarizon import susceptibility as sus
from polarizon import timedomain as td
from polarizon.medium import SpectralGrid, discretize, slab_profile
from polarizon.spectral import spectral_rule
from polarizon.suites import oracle_run

from conftest import homogeneous, reference_dict, two_layer
from polarizon.medium import config_from_dict

RESULTS = {}


def record(n, ok, elapsed, budget, detail):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({elapsed:.1f} s of {budget:.0f} s)  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def reference_layers():
    cfg = config_from_dict(reference_dict())
    prof, _, _ = two_layer()
    return [*cfg.profile.layers, cfg.profile.exterior, *prof.layers, prof.exterior]


def test_criterion_01_susceptibility_analyticity_and_kk():
    t0 = time.perf_counter()
    zeros, kk = [], []
    for lay in reference_layers():
        zeros.append(len(sus.denominator_zero_scan(lay)))
        grid = SpectralGrid.uniform(2, 1.0, 2048, 50 * lay.omega0)
        kk.append(sus.kramers_kronig_residual(lay, grid))
    ok = max(zeros) == 0 and max(kk) < 1e-3
    assert record(1, ok, time.perf_counter() - t0, 5,
                  f"zeros found {sum(zeros)}, max KK residual {max(kk):.2e} (< 1e-3)")


def test_criterion_02_susceptibility_sum_rules():
    t0 = time.perf_counter()
    worst = 0.0
    for lay in reference_layers():
        grid = SpectralGrid.uniform(2, 1.0, 2048, 50 * lay.omega0)
        ra, rb, *_ = sus.chi_sum_rules(lay, grid)
        worst = max(worst, ra, rb)
    assert record(2, worst < 1e-2, time.perf_counter() - t0, 5,
                  f"max relative moment residual {worst:.2e} (< 1e-2)")


def test_criterion_03_green_defining_equation_and_reciprocity():
    t0 = time.perf_counter()
    prof, _, _ = homogeneous()
    omega = 1.3
    res = []
    for Nz in (128, 256, 512):
        g = SpectralGrid.uniform(Nz, 4.0, 8, 20.0)
        res.append(gf.defining_residual(gf.build_green(prof, omega, g), prof))
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    lp, lg, sites = two_layer(32, 8)
    recip = max(gf.reciprocity_residual(gf.build_green(p, omega, lg)) for p in (prof, lp))
    ws = np.array([0.5, 1.3, 4.0])
    a, b = gf.lattice_green(sites, ws).G, gf.lattice_green_dense(sites, ws).G
    dense = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    ok = all(abs(o - 2) < 0.2 for o in orders) and res[-1] < 1e-3 and recip < 1e-12 \
        and dense < 1e-6
    assert record(3, ok, time.perf_counter() - t0, 30,
                  f"residuals {res[0]:.2e}/{res[1]:.2e}/{res[2]:.2e}, orders "
                  f"{orders[0]:.3f}/{orders[1]:.3f}, reciprocity {recip:.1e}, dense {dense:.1e}")


def test_criterion_04_optical_theorem():
    t0 = time.perf_counter()
    worst_off, worst_eq = 0.0, 0.0
    for make in (homogeneous, two_layer):
        prof, grid, _ = make()
        for w1, w2 in ((0.8, 1.3), (0.5, 2.2), (1.7, 3.1)):
            worst_off = max(worst_off, gf.optical_theorem_residual(prof, w1, w2, grid))
        for w in (0.7, 1.1, 2.5):
            worst_eq = max(worst_eq, gf.optical_theorem_residual(prof, w, w, grid))
    ok = worst_off < 1e-3 and worst_eq < 1e-4
    assert record(4, ok, time.perf_counter() - t0, 60,
                  f"w != w' {worst_off:.2e} (< 1e-3), w = w' {worst_eq:.2e} (< 1e-4)")


def test_criterion_05_green_sum_rules():
    t0 = time.perf_counter()
    _, grid, sites = two_layer()
    worst_d, worst_o, monotone = 0.0, 0.0, True
    tables = {}
    for rule in gf.SUM_RULES:
        r = gf.sum_rule(sites, rule, grid.omega_max)
        worst_d = max(worst_d, r.diagonal_residual())
        worst_o = max(worst_o, r.offdiagonal_residual())
        rows = gf.sum_rule_convergence(sites, rule, [5.0, 10.0, 20.0, 40.0])
        tables[rule] = rows
        res = [e for _, e in rows]
        monotone &= all(b <= a * 1.001 for a, b in zip(res, res[1:]))
    for rule, rows in tables.items():
        print(rule, " ".join(f"{om:g}:{e:.2e}" for om, e in rows))
    ok = worst_d < 2e-2 and worst_o < 2e-2 and monotone
    assert record(5, ok, time.perf_counter() - t0, 120,
                  f"diagonal {worst_d:.2e}, off-diagonal {worst_o:.2e} (< 2e-2), "
                  f"monotone in omega_max: {monotone}")


def test_criterion_06_noise_current_algebra():
    t0 = time.perf_counter()
    _, grid, sites = two_layer(32, 256)
    dual, eig = 0.0, 0.0
    for k in (17, 40, 90):
        w = grid.omega_nodes[k]
        J = nc.build_noise_current(sites, [w])
        dual = max(dual, nc.dual_construction_residual(J, nc.assemble_noise_current(sites, w)))
        eig = max(eig, nc.eigenoperator_residual_rows(J, w))
    rep = nc.jj_commutators(sites, grid.omega_nodes, grid.omega_weights)
    ok = dual < 1e-8 and rep.diag_residual < 2e-2 and rep.offdiag_max < 1e-6 \
        and rep.jj_max < 1e-8 and eig < 1e-6
    assert record(6, ok, time.perf_counter() - t0, 180,
                  f"dual {dual:.1e}, diagonal {rep.diag_residual:.1e}, off-diagonal "
                  f"{rep.offdiag_max:.1e}, [J,J] {rep.jj_max:.1e}, eigenoperator {eig:.1e}")


def test_criterion_07_completeness():
    t0 = time.perf_counter()
    _, grid, sites = two_layer()
    rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights)
    tgt, leak = 0.0, 0.0
    for target in ("A", "Pi", "X"):
        r = nc.reconstruct_canonical(sites, rule, target)
        tgt, leak = max(tgt, r.target_error), max(leak, r.leakage)
    ok = tgt < 2e-2 and leak < 2e-2
    assert record(7, ok, time.perf_counter() - t0, 120,
                  f"target block {tgt:.1e}, leakage {leak:.1e} (< 2e-2)")


def test_criterion_08_hamiltonian():
    t0 = time.perf_counter()
    res = {}
    for Nz, Nw in ((16, 128), (32, 256)):
        _, grid, sites = two_layer(Nz, Nw)
        rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights)
        res[(Nz, Nw)] = nc.hamiltonian_diagonal_residual(sites, rule).residual
    fine = res[(32, 256)]
    print("Hamiltonian residual by grid:", {f"{a}x{b}": f"{v:.2e}" for (a, b), v in res.items()})
    assert record(8, fine < 2e-2, time.perf_counter() - t0, 300,
                  f"relative Frobenius distance {fine:.2e} at Nz=32, Nomega=256 (< 2e-2); "
                  f"coarse {res[(16, 128)]:.2e}")


def test_criterion_09_oracle_equivalence():
    t0 = time.perf_counter()
    lay = dict(width=4.0, alpha=1.0, rho=1.0, omega0=1.0, gamma=0.3, **{"lambda": 5.0})
    ext = dict(alpha=0.5, rho=1.0, omega0=1.5, gamma=0.5, **{"lambda": 5.0})
    with pytest.warns(UserWarning):
        prof = slab_profile([lay], ext)
    grid = SpectralGrid.uniform(16, 4.0, 512, 60.0)
    sites = discretize(prof, grid)
    hist, errs = oracle_run(sites, grid, 20.0, np.random.default_rng(7))
    rule0 = spectral_rule(sites, grid.omega_nodes, grid.omega_weights)
    short = {k: td.short_time_residual(sites, rule0, k) for k in ("E", "A")}
    ok = max(errs.values()) < 1e-3 and max(short.values()) < 2e-2
    assert record(9, ok, time.perf_counter() - t0, 300,
                  "relative L2 " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
                  + f" (< 1e-3); t=0 E {short['E']:.1e}, A {short['A']:.1e} (< 2e-2)")


def test_criterion_10_long_time_limit():
    t0 = time.perf_counter()
    cfg = config_from_dict(reference_dict())
    grid = cfg.grid
    sites = discretize(cfg.profile, grid)
    gam = float(sites.gamma.min())
    times = np.array([10.0, 15.0, 20.0, 25.0, 30.0]) / gam
    rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights, t_max=times.max())
    rep = td.long_time_report(sites, rule, "E", times)
    late = rep.relative_gap[times >= 20 / gam]
    _, g2, s2 = two_layer()
    jl = td.long_time_commutators(s2, g2.omega_nodes, g2.omega_weights)
    ok = late.max() < 5e-2 and rep.decay_rate > 0 and jl.diag_residual < 2e-2 \
        and jl.offdiag_max < 1e-6 and jl.jj_max < 1e-8
    print("long-time E gap:", " ".join(f"t={t:g}:{g:.3f}" for t, g in zip(times, rep.relative_gap)))
    assert record(10, ok, time.perf_counter() - t0, 180,
                  f"gap for t >= 20/gamma {late.max():.3f} (< 5e-2), fitted non-bath decay rate "
                  f"{rep.decay_rate:.3f}; J_l kernels {jl.diag_residual:.1e}/{jl.offdiag_max:.1e}/"
                  f"{jl.jj_max:.1e}")


def test_criterion_11_equal_time_commutator():
    t0 = time.perf_counter()
    worst, off = 0.0, 0.0
    for make in (two_layer, homogeneous):
        _, grid, sites = make(16, 128, 40.0)
        w0 = float(sites.omega0.min())
        for t in (0.0, 5.0 / w0, 20.0 / w0):
            rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights, t_max=t)
            c = td.equal_time_commutator(sites, rule, t)
            worst, off = max(worst, c.diag_residual), max(off, c.offdiag_max)
    assert record(11, worst < 1e-3, time.perf_counter() - t0, 120,
                  f"diagonal relative error {worst:.1e} (< 1e-3); off-diagonal {off:.1e}")
