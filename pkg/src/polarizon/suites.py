"""Verification suites: each runs one module's invariant set on a configuration."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import greenfn as gf
from . import noisecurrent as nc
from . import susceptibility as sus
from . import timedomain as td
from .medium import (Config, Layer, MediumProfile, SpectralGrid, bath_weight_integral,
                     bath_weight_tail, discretize)
from .oracle import (OracleSystem, compare_reconstruction, embed, integrate_eom,
                     random_initial, taylor_step)
from .report import Check, CheckReport
from .spectral import spectral_rule

SUITES = ("susceptibility", "greenfn", "noisecurrent", "timedomain", "oracle")


def homogeneous_variant(profile: MediumProfile) -> MediumProfile:
    """The exterior medium filling the whole slab: a contrasting, interface-free profile."""
    e = profile.exterior
    lay = replace(e, z_start=0.0, z_end=profile.domain_length)
    return MediumProfile((lay,), e, profile.gamma_min)


def _layers(profile: MediumProfile):
    return [(f"layer{i}", lay) for i, lay in enumerate(profile.layers)] + \
        [("exterior", profile.exterior)]


class _Suite:
    def __init__(self, name: str, cfg: Config, scale: float, seed: int):
        self.report = CheckReport(name)
        self.cfg = cfg
        self.scale = scale
        self.rng = np.random.default_rng(seed)
        self.grid = cfg.grid.summary()

    def add(self, id, ref, value, target, residual, tol, kind="quadrature", grid=None, notes=""):
        tol = tol * self.scale if kind != "exact" else tol
        self.report.add(Check(id, ref, value, target, float(residual), float(tol),
                              grid or self.grid, kind, notes))


# --- susceptibility ---------------------------------------------------------------

def suite_susceptibility(cfg: Config, scale: float = 1.0, seed: int = 0) -> CheckReport:
    s = _Suite("susceptibility", cfg, scale, seed)
    for name, lay in _layers(cfg.profile):
        w0 = lay.omega0
        g = SpectralGrid.uniform(2, 1.0, 2048, 50 * w0)
        gs = g.summary()
        zeros = sus.denominator_zero_scan(lay)
        s.add(f"{name}.denominator_zeros", "denominator-nonvanishing", len(zeros), 0, len(zeros),
              0, "exact", gs)
        if lay.coupling_sq > 0:
            r = sus.kramers_kronig_residual(lay, g)
            s.add(f"{name}.kramers_kronig", "kramers-kronig", r, 0.0, r, 1e-3, grid=gs)
            ra, rb, va, vb, ta, tb = sus.chi_sum_rules(lay, g)
            s.add(f"{name}.first_moment", "susceptibility-first-moment", va, ta, ra, 1e-2, grid=gs,
                  notes="tail: leading large-omega model")
            s.add(f"{name}.third_moment", "susceptibility-third-moment", vb, tb, rb, 1e-2, grid=gs,
                  notes="tail: next-order large-omega model")
        quad = bath_weight_integral_quadrature(lay)
        closed = bath_weight_integral(lay)
        rel = abs(quad - closed) / closed if closed else abs(quad)
        s.add(f"{name}.bath_weight_integral", "renormalized-frequency", quad, closed, rel, 1e-6)
        for p, q in ((1.0, 2.0), (0.1, 10.0), (0.5 + 1j, 1.5 - 0.5j)):
            r = sus.bath_auxiliary_identity_residual(lay, p, q)
            s.add(f"{name}.bath_identity.{p}_{q}", "bath-auxiliary-identity", r, 0.0, r, 1e-6)
        ps = np.logspace(-2, 2, 9) * (1 + 0.3j)
        r = max(abs(sus.chi_laplace(lay, p) - sus.chi_laplace_quadrature(lay, p))
                / abs(sus.chi_laplace(lay, p)) for p in ps)
        s.add(f"{name}.laplace_closed_vs_quadrature", "susceptibility-laplace", r, 0.0, r, 1e-8)
        r = max(abs(sus.chi_laplace(lay, np.conj(p)) - np.conj(sus.chi_laplace(lay, p))) for p in ps)
        s.add(f"{name}.conjugation", "susceptibility-reality", r, 0.0, r, 1e-14, "exact")
        w = np.linspace(0.01, 50 * w0, 4001)
        mn = float(np.min(sus.chi_omega(lay, w).imag))
        s.add(f"{name}.passivity", "susceptibility-passivity", mn, 0.0,
              0.0 if (mn > 0 or lay.coupling_sq == 0) else 1.0, 0.0, "exact")
    return s.report


def bath_weight_integral_quadrature(layer: Layer, omega_max: float | None = None) -> float:
    """int_0^inf v^2 by quadrature up to omega_max plus the closed tail beyond."""
    from scipy import integrate
    from .medium import coupling_v
    om = omega_max or 10 * layer.cutoff_lambda
    val = integrate.quad(lambda w: coupling_v(layer, w) ** 2, 0, om, epsabs=0, epsrel=1e-12,
                         limit=200)[0]
    return val + bath_weight_tail(layer, om)


# --- Green function ---------------------------------------------------------------------

def suite_greenfn(cfg: Config, scale: float = 1.0, seed: int = 0) -> CheckReport:
    s = _Suite("greenfn", cfg, scale, seed)
    prof = cfg.profile
    L = prof.domain_length
    w0 = float(np.mean([lay.omega0 for lay in prof.layers]))
    omega = 1.3 * w0
    hom = homogeneous_variant(prof)
    for label, p in (("homogeneous", hom), ("config", prof)):
        res = []
        for Nz in (128, 256, 512):
            g = SpectralGrid.uniform(Nz, L, 8, cfg.grid.omega_max)
            res.append(gf.defining_residual(gf.build_green(p, omega, g), p))
        order = math.log2(res[1] / res[2])
        s.report.tables[f"defining_equation.{label}"] = [[n, r] for n, r in zip((128, 256, 512), res)]
        if label == "homogeneous":
            s.add("defining_equation.order", "green-defining-equation", order, 2.0,
                  abs(order - 2), 0.2, notes=f"residuals {res}")
            s.add("defining_equation.fine", "green-defining-equation", res[2], 0.0, res[2], 1e-3)
        else:
            s.add("defining_equation.order_layered", "green-defining-equation", order, 2.0, 0.0,
                  0.0, "info", notes="stencils straddling a material interface are first order")
    for label, p in (("config", prof), ("homogeneous", hom)):
        G = gf.build_green(p, omega, cfg.grid)
        r = gf.reciprocity_residual(G)
        s.add(f"{label}.reciprocity", "green-reciprocity", r, 0.0, r, 1e-12, "exact")
        r = gf.wronskian_variation(G)
        s.add(f"{label}.wronskian", "green-wronskian", r, 0.0, r, 1e-10, "exact")
        for w1, w2, tol in ((0.8 * w0, 1.3 * w0, 1e-3), (1.1 * w0, 1.1 * w0, 1e-4)):
            r = gf.optical_theorem_residual(p, w1, w2, cfg.grid)
            s.add(f"{label}.optical_theorem.{w1:.3g}_{w2:.3g}", "optical-theorem", r, 0.0, r, tol)
    sites = discretize(prof, cfg.grid)
    ws = np.array([0.5, 1.0, 2.5]) * w0
    a = gf.lattice_green(sites, ws).G
    b = gf.lattice_green_dense(sites, ws).G
    r = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    s.add("lattice.recursion_vs_dense", "green-dense-oracle", r, 0.0, r, 1e-6)
    r = gf.reciprocity_residual(a)
    s.add("lattice.reciprocity", "green-reciprocity", r, 0.0, r, 1e-12, "exact")
    om = cfg.grid.omega_max
    for rule in gf.SUM_RULES:
        res = gf.sum_rule(sites, rule, om)
        s.add(f"sum_rule.{rule}.diagonal", f"green-sum-rule-{rule}",
              complex(np.diag(res.value)[0]), complex(np.diag(res.target)[0]),
              res.diagonal_residual(), 2e-2)
        s.add(f"sum_rule.{rule}.offdiagonal", f"green-sum-rule-{rule}", res.offdiagonal_residual(),
              0.0, res.offdiagonal_residual(), 2e-2)
        s.report.tables[f"sum_rule_convergence.{rule}"] = [
            list(r) for r in gf.sum_rule_convergence(sites, rule, [om / 2, om, 2 * om])]
    probe = gf.analyticity_probe(sites, [1e2, 1e3, 1e4])
    r = float(np.max(np.abs(probe[-1] - 1)))
    s.add("lattice.large_frequency", "green-asymptotics", r, 0.0, r, 1e-2)
    return s.report


# --- noise current ------------------------------------------------------------------------

def suite_noisecurrent(cfg: Config, scale: float = 1.0, seed: int = 0) -> CheckReport:
    s = _Suite("noisecurrent", cfg, scale, seed)
    grid = cfg.grid
    sites = discretize(cfg.profile, grid)
    n = sites.n
    i0 = n // 2
    Pi = nc.OperatorCoefficients.unit(sites, "Pi", [i0])
    A = nc.OperatorCoefficients.unit(sites, "A", [i0])
    v = nc.commutator(Pi, A)
    s.add("canonical.pi_a", "canonical-commutator", v, -1j / sites.dz,
          abs(v + 1j / sites.dz) * sites.dz, 1e-14, "exact")
    w0 = float(np.mean(sites.omega0))
    for w in (0.7 * w0, 1.3 * w0, 2.5 * w0):
        wn = grid.omega_nodes[grid.nearest_node(w)]
        r = nc.dual_construction_residual(nc.build_noise_current(sites, [wn]),
                                          nc.assemble_noise_current(sites, wn))
        s.add(f"dual_construction.{wn:.4g}", "noise-current-dual-construction", r, 0.0, r, 1e-8,
              "exact")
        r = nc.eigenoperator_residual_rows(nc.build_noise_current(sites, [wn]), wn)
        s.add(f"eigenoperator.J.{wn:.4g}", "noise-current-eigenoperator", r, 0.0, r, 1e-6, "exact")
        r = nc.eigenoperator_residual_rows(nc.positive_frequency_field(sites, wn), wn)
        s.add(f"eigenoperator.Eplus.{wn:.4g}", "positive-frequency-eigenoperator", r, 0.0, r, 1e-6,
              "exact")
    for label, rows in (("J", None), ("J_l", nc.long_time_noise_current(sites, grid.omega_nodes))):
        rep = nc.jj_commutators(sites, grid.omega_nodes, grid.omega_weights, rows=rows)
        s.add(f"{label}.commutator_diagonal", "noise-current-commutator", float(np.mean(rep.diag_ratio)),
              1.0, rep.diag_residual, 2e-2)
        s.add(f"{label}.commutator_offdiagonal", "noise-current-commutator", rep.offdiag_max, 0.0,
              rep.offdiag_max, 1e-6)
        s.add(f"{label}.commutator_jj", "noise-current-commutator-vanishing", rep.jj_max, 0.0,
              rep.jj_max, 1e-8)
    rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights)
    for target in ("A", "Pi", "X"):
        if target == "X" and np.any(sites.alpha <= 0):
            continue
        r = nc.reconstruct_canonical(sites, rule, target)
        s.add(f"completeness.{target}.target", "completeness", 1.0, 1.0, r.target_error, 2e-2)
        s.add(f"completeness.{target}.leakage", "completeness", r.leakage, 0.0, r.leakage, 2e-2)
    h = nc.hamiltonian_diagonal_residual(sites, rule)
    s.add("hamiltonian.frobenius", "hamiltonian-diagonal-form", h.residual, 0.0, h.residual, 2e-2)
    r = float(np.max(np.abs(h.pipi_ratio - 1)))
    s.add("hamiltonian.pi_pi", "hamiltonian-diagonal-form", float(np.mean(h.pipi_ratio)), 1.0, r, 2e-2)
    s.add("hamiltonian.a_a", "hamiltonian-diagonal-form", h.aa_error, 0.0, h.aa_error, 2e-2)
    s.report.tables["hamiltonian.blocks"] = [[k, e, t] for k, (e, t) in sorted(h.block_errors.items())]
    return s.report


# --- time domain --------------------------------------------------------------------------

def suite_timedomain(cfg: Config, scale: float = 1.0, seed: int = 0) -> CheckReport:
    s = _Suite("timedomain", cfg, scale, seed)
    grid = cfg.grid
    sites = discretize(cfg.profile, grid)
    w0 = float(np.min(sites.omega0))
    rule0 = spectral_rule(sites, grid.omega_nodes, grid.omega_weights)
    for kind in ("E", "A"):
        r = td.short_time_residual(sites, rule0, kind)
        s.add(f"short_time.{kind}", "short-time-limit", r, 0.0, r, 2e-2)
    t1 = 5.0 / w0
    rule1 = spectral_rule(sites, grid.omega_nodes, grid.omega_weights, t_max=t1)
    kinds = ["A", "E"] + (["X"] if np.all(sites.alpha > 0) else [])
    for kind in kinds:
        r = td.route_difference(sites, rule1, kind, [0.0, t1])
        s.add(f"two_routes.{kind}", "field-coefficient-tables", r, 0.0, r, 1e-6, "exact")
    if "X" in kinds:
        r = td.x_route_difference(sites, rule1, [0.0, t1])
        s.add("two_routes.X_polarization", "polarization-two-routes", r, 0.0, r, 1e-6, "exact")
    for label, prof in (("config", cfg.profile), ("homogeneous", homogeneous_variant(cfg.profile))):
        sp = discretize(prof, grid)
        for t in (0.0, 5.0 / w0, 20.0 / w0):
            rule = spectral_rule(sp, grid.omega_nodes, grid.omega_weights, t_max=t)
            c = td.equal_time_commutator(sp, rule, t)
            s.add(f"equal_time.{label}.t{t:.3g}.diagonal", "equal-time-commutator",
                  complex(np.mean(c.diag)), 1.0, c.diag_residual, 1e-3)
            s.add(f"equal_time.{label}.t{t:.3g}.offdiagonal", "equal-time-commutator",
                  c.offdiag_max, 0.0, c.offdiag_max, 1e-3)
    gam = float(np.min(sites.gamma))
    times = np.array([10, 15, 20, 25, 30]) / gam
    rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights, t_max=times.max())
    rep = td.long_time_report(sites, rule, "E", times)
    late = rep.relative_gap[times >= 20 / gam]
    s.add("long_time.E.gap", "long-time-limit", float(late.max()), 0.0, float(late.max()), 5e-2)
    s.add("long_time.E.decay_rate", "long-time-limit", rep.decay_rate, gam / 2, 0.0, 0.0, "info",
          notes="fitted rate of the non-bath norm, reported only")
    s.report.tables["long_time.E"] = [[t, g, a, b] for t, g, a, b in
                                      zip(times, rep.relative_gap, rep.nonbath_norm, rep.bath_norm)]
    return s.report


# --- oracle -------------------------------------------------------------------------------

def oracle_run(sites, grid: SpectralGrid, t_max: float, rng, n_samples: int = 41,
               data_pad: int = 4, kinds=("A", "E", "X"), data=None):
    """Comparison of the reconstruction with direct integration.

    Initial data live on the slab plus ``data_pad`` exterior columns per side;
    random unless ``data`` is given.
    """
    cols = sites.padded(data_pad)
    if data is None:
        data = random_initial(cols, grid.omega_nodes, rng)
    po = int(np.ceil(t_max / (2 * sites.dz))) + data_pad + 16
    system = OracleSystem(sites.padded(po), grid.omega_nodes, grid.omega_weights)
    dt = 0.1 * min(2 * np.pi / grid.omega_max, sites.dz)
    hist = integrate_eom(system, embed(data, system.N, po - data_pad), t_max, dt, n_samples,
                         grid.omega_max)
    rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights, t_max=t_max)
    trs = [td.trajectory(sites, rule, k, hist.times, data, data_pad) for k in kinds]
    return hist, compare_reconstruction(hist, trs, slice(po, po + sites.n))


def free_wave_error(Nz: int, length: float = 8.0, t: float = 2.0) -> float:
    """alpha = 0 lattice against the d'Alembert solution of a Gaussian pulse."""
    from .medium import slab_profile
    lay = dict(width=length, alpha=0.0, rho=1.0, omega0=1.0, gamma=1e-3, **{"lambda": 10.0})
    prof = slab_profile([lay], dict(lay))
    grid = SpectralGrid.uniform(Nz, length, 4, 1.0)
    sites = discretize(prof, grid)
    system = OracleSystem(sites, grid.omega_nodes, grid.omega_weights)
    z = grid.z_nodes
    f = lambda x: np.exp(-((x - length / 2) / 0.5) ** 2)
    st = embed_fields(system, A=f(z))
    hist = integrate_eom(system, st, t, 0.1 * sites.dz, 2, omega_max=grid.omega_max)
    exact = 0.5 * (f(z - t) + f(z + t))
    return float(np.max(np.abs(hist.field("A")[-1] - exact)))


def embed_fields(system: OracleSystem, **fields):
    from .oracle import ClassicalState
    st = ClassicalState.zeros(system.N, system.K)
    for k, v in fields.items():
        getattr(st, k)[:] = v
    return st


def suite_oracle(cfg: Config, scale: float = 1.0, seed: int = 0) -> CheckReport:
    s = _Suite("oracle", cfg, scale, seed)
    o = cfg.raw.get("oracle", {})
    og = SpectralGrid.uniform(cfg.grid.Nz, cfg.profile.domain_length,
                              int(o.get("Nomega", 1024)), float(o.get("omega_max", 120.0)))
    if s.scale > 1:
        og = og.with_sizes(Nomega=og.Nomega // 2, omega_max=og.omega_max / 2)
    sites = discretize(cfg.profile, og)
    w0 = float(np.min(sites.omega0))
    # transpose relation with the coefficient-row generator, on a small lattice
    small = SpectralGrid.uniform(4, cfg.profile.domain_length, 6, og.omega_max)
    sp = discretize(cfg.profile, small).padded(3)
    sysm = OracleSystem(sp, small.omega_nodes, small.omega_weights)
    a = sysm.coefficient_generator().toarray()
    b = nc.generator_matrix(sp, small.omega_nodes, small.omega_weights).toarray()
    r = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    s.add("generator_transpose", "equations-of-motion", r, 0.0, r, 1e-12, "exact")
    zero = integrate_eom(sysm, embed_fields(sysm), 1.0, 0.1 * min(2 * np.pi / og.omega_max, sp.dz), 3)
    r = float(np.max(np.abs(zero.states)))
    s.add("zero_state", "equations-of-motion", r, 0.0, r, 0.0, "exact")
    # self-convergence of the stepper on the small system
    y0 = s.rng.standard_normal(sysm.size)
    h = 0.4 / np.abs(sysm.L).sum(axis=1).max()
    errs = []
    for order in (4,):
        ref = y0.copy()
        for _ in range(64):
            ref = taylor_step(sysm.L, ref, h / 16, 12)
        for m in (1, 2):
            y = y0.copy()
            for _ in range(4 * m):
                y = taylor_step(sysm.L, y, h / m, order)
            errs.append(float(np.linalg.norm(y - ref)))
    obs = math.log2(errs[0] / errs[1])
    s.add("stepper.order", "equations-of-motion", obs, 4.0, abs(obs - 4), 0.5,
          notes="order-4 truncation of the Taylor stepper; runs use order 12")
    e1, e2 = free_wave_error(128), free_wave_error(256)
    order = math.log2(e1 / e2)
    s.add("free_wave.order", "free-propagation", order, 2.0, abs(order - 2), 0.3,
          notes=f"max errors {e1:.3e}, {e2:.3e}")
    hist, errs = oracle_run(sites, og, 20.0 / w0, s.rng)
    gs = og.summary()
    drift = hist.energy_drift()
    s.add("energy_drift", "equations-of-motion", drift, 0.0, drift, 1e-6, grid=gs)
    for k, e in errs.items():
        s.add(f"reconstruction.{k}", "time-domain-reconstruction", e, 0.0, e, 1e-3, grid=gs,
              notes=hist.scheme)
    return s.report


RUNNERS = {"susceptibility": suite_susceptibility, "greenfn": suite_greenfn,
           "noisecurrent": suite_noisecurrent, "timedomain": suite_timedomain,
           "oracle": suite_oracle}


def run_suite(cfg: Config, suite: str, quick: bool = False, seed: int = 0) -> CheckReport:
    if quick:
        cfg = cfg.quick_version()
    scale = cfg.tolerance_scale if quick else 1.0
    names = SUITES if suite == "all" else (suite,)
    if any(nm not in RUNNERS for nm in names):
        raise ValueError(f"unknown suite {suite!r}")
    out = CheckReport(suite)
    for nm in names:
        out.extend(RUNNERS[nm](cfg, scale, seed))
    return out
