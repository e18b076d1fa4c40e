"""Time-dependent fields A, E and X as functionals of the initial canonical fields.

Two routes produce the same functional:

* coefficient tables: every coefficient has the form (p/pi) v Im[h D+] with an
  explicit kernel h built from G and chi/alpha (``table_provider``);
* contraction of the Green-function kernels with the noise-current rows over
  all space (``noisecurrent.green_provider``).

The tables are evaluated on interior columns plus explicit exterior columns,
enough to cover the light cone at the requested time.  The contraction route
only has the interior columns and is used as the cross-check there.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .greenfn import chi_over_alpha_sites, lattice_green
from .medium import DomainError, Sites
from .noisecurrent import (BLOCKS, OperatorCoefficients, commutator_matrix,
                           completeness_provider, green_provider, long_time_noise_current,
                           jj_commutators)
from .spectral import ClassicalData, SpectralRule, functional_at, history

KINDS = ("A", "E", "X")


def default_pad(sites: Sites, t: float, margin: int = 12) -> int:
    """Exterior columns per side covering the light cone |z - z'| <= t."""
    return int(np.ceil(t / sites.dz)) + margin


def _green_columns(sites: Sites, w: np.ndarray, pad: int):
    """G(z_i, col) for interior rows and padded columns: (K, n, n + 2 pad), plus chi/alpha."""
    G = lattice_green(sites, w)
    d = np.arange(1, pad + 1)
    lam = G.lam[:, None, None]
    left = G.G[:, :, :1] * lam ** d[::-1][None, None, :]
    right = G.G[:, :, -1:] * lam ** d[None, None, :]
    return np.concatenate([left, G.G, right], axis=2)


def table_provider(sites: Sites, kind: str, pad: int):
    """Explicit coefficient tables of A, E or X on interior targets and padded columns.

    A:  c_AA = -(1/pi) w Im G,  c_APi = -(i/pi) Im G,
        c_AX = -(i/pi)[alpha' Im G + rho' w^2 Im(G g')],  c_AP = (1/pi) w Im(G g'),
        bath kernel h = w G g' with p = 1 (g = chi/alpha, primes at the column).
    E:  i w times the A tables.
    X:  bath kernel h = (g/alpha) delta/dz - w^2 g G g' with p = i, and the
        non-bath entries that follow from the same h.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    if kind == "X" and np.any(sites.alpha <= 0):
        raise DomainError("X tables divide by alpha; every interior site needs alpha > 0")
    cols = sites.padded(pad)
    n, C, dz = sites.n, cols.n, sites.dz
    inner = pad + np.arange(n)

    def provider(w):
        w = np.asarray(w, float)
        K = len(w)
        G = _green_columns(sites, w, pad)                                  # (K, n, C)
        gc = chi_over_alpha_sites(cols, w)[:, None, :]                     # (K, 1, C)
        al, rho = cols.alpha[None, None, :], cols.rho[None, None, :]
        W = w[:, None, None]
        F = np.zeros((K, n, 4, C), complex)
        if kind in ("A", "E"):
            h = W * G * gc
            F[:, :, 0] = -(1 / np.pi) * W * G.imag
            F[:, :, 1] = -(1j / np.pi) * G.imag
            F[:, :, 2] = -(1j / np.pi) * (al * G.imag + rho * W**2 * (G * gc).imag)
            F[:, :, 3] = (1 / np.pi) * W * (G * gc).imag
            p = 1.0
            if kind == "E":
                F = 1j * W[..., None] * F
                p = 1j * W
        else:
            gz = chi_over_alpha_sites(sites, w)[:, :, None]                # (K, n, 1)
            loc = np.zeros((K, n, C), complex)
            loc[:, np.arange(n), inner] = (gz[:, :, 0] / sites.alpha[None, :]) / dz
            gG = gz * G
            gGg = gG * gc
            h = loc - W**2 * gGg
            F[:, :, 0] = (1j / np.pi) * W**2 * gG.imag
            F[:, :, 1] = -(1 / np.pi) * W * gG.imag
            F[:, :, 2] = (1 / np.pi) * (rho * W * loc.imag - al * W * gG.imag
                                        - rho * W**3 * gGg.imag)
            F[:, :, 3] = (1j / np.pi) * (loc.imag - W**2 * gGg.imag)
            p = 1j
        Fa = p * h / (2j * np.pi)
        Fb = -p * np.conj(h) / (2j * np.pi)
        return F, Fa, Fb

    return provider, cols


def long_time_provider(sites: Sites, kind: str, pad: int):
    """Field kernels contracted with the long-time current J_l over padded columns.

    J_l at a column is local there: pole amplitudes +-(i/2pi) w chi/alpha, so
    the contraction is the kernel times that amplitude.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    if kind == "X" and np.any(sites.alpha <= 0):
        raise DomainError("X reconstruction divides by alpha; every site needs alpha > 0")
    cols = sites.padded(pad)
    n, C, dz = sites.n, cols.n, sites.dz
    inner = pad + np.arange(n)

    def provider(w):
        w = np.asarray(w, float)
        K = len(w)
        G = _green_columns(sites, w, pad)
        W = w[:, None, None]
        if kind == "A":
            kern = -G
        elif kind == "E":
            kern = -1j * W * G
        else:
            gz = chi_over_alpha_sites(sites, w)[:, :, None]
            kern = 1j * W * gz * G
            kern[:, np.arange(n), inner] += -1j / (sites.alpha[None, :] * w[:, None] * dz)
        amp = (1j / (2 * np.pi)) * W * chi_over_alpha_sites(cols, w)[:, None, :]
        Fa = kern * amp
        return np.zeros((K, n, 4, C), complex), Fa, -Fa

    return provider, cols


# --- trajectories -------------------------------------------------------------------

@dataclass
class FieldTrajectory:
    """Coefficient functionals (or a contracted classical history) of one field."""
    times: np.ndarray
    field_kind: str
    coefficients: list = field(default_factory=list)        # OperatorCoefficients per time
    values: np.ndarray | None = None                        # (nt, n) contracted history
    pad: int = 0


def _as_operator(cols: Sites, blocks, fY, fQ, rule: SpectralRule) -> OperatorCoefficients:
    T = blocks.shape[0]
    O = OperatorCoefficients.zeros(cols, T)
    for b, k in enumerate(BLOCKS):
        O.blocks[k] = blocks[:, b, :].astype(complex)
    O.bath_grid = (fY, fQ)
    O.bath_nodes = rule.bath_nodes
    O.bath_weights = rule.bath_weights
    return O


def field_coefficients(sites: Sites, rule: SpectralRule, kind: str, t, pad: int | None = None,
                       long_time: bool = False) -> FieldTrajectory:
    """Coefficients of kind(z_i, t) over padded columns and the bath nodes.

    ``t`` may be a scalar or an array of non-negative times.
    """
    times = np.atleast_1d(np.asarray(t, float))
    if np.any(times < 0):
        raise DomainError("field trajectories are evaluated for t >= 0 only")
    pad = default_pad(sites, float(times.max())) if pad is None else pad
    make = long_time_provider if long_time else table_provider
    provider, cols = make(sites, kind, pad)
    out = functional_at(provider, cols, times, rule)
    coeffs = [_as_operator(cols, b, fY, fQ, rule) for b, fY, fQ in out]
    return FieldTrajectory(times, kind, coeffs, pad=pad)


def long_time_field(sites: Sites, rule: SpectralRule, kind: str, t,
                    pad: int | None = None) -> FieldTrajectory:
    """The same field with the noise current replaced by its long-time part J_l."""
    times = np.atleast_1d(np.asarray(t, float))
    if np.any(times <= 0):
        raise DomainError("the long-time form is defined for t > 0")
    return field_coefficients(sites, rule, kind, times, pad, long_time=True)


def contracted_route(sites: Sites, rule: SpectralRule, kind: str, t):
    """Interior-column coefficients from the Green kernels contracted with J rows."""
    return functional_at(green_provider(sites, kind), sites, t, rule)


def route_difference(sites: Sites, rule: SpectralRule, kind: str, t) -> float:
    """max |tables - contraction| over interior columns, relative to max |tables|."""
    traj = field_coefficients(sites, rule, kind, t)
    other = contracted_route(sites, rule, kind, traj.times)
    inner = slice(traj.pad, traj.pad + sites.n)
    err, scale = 0.0, 0.0
    for O, (b, fY, fQ) in zip(traj.coefficients, other):
        mine = np.stack([O.blocks[k] for k in BLOCKS], axis=1)[:, :, inner]
        y, q = O.bath_grid
        for u, v in ((mine, b), (y[:, inner], fY), (q[:, inner], fQ)):
            err = max(err, float(np.abs(u - v).max()))
            scale = max(scale, float(np.abs(u).max()))
    return err / scale


def x_route_difference(sites: Sites, rule: SpectralRule, t) -> float:
    """X from the P-coefficient of J versus X from G and the bare J term (relative max)."""
    a = functional_at(completeness_provider(sites, "X"), sites, t, rule)
    b = functional_at(green_provider(sites, "X"), sites, t, rule)
    err, scale = 0.0, 0.0
    for pa, pb in zip(a, b):
        for u, v in zip(pa, pb):
            err = max(err, float(np.abs(u - v).max()))
            scale = max(scale, float(np.abs(u).max()))
    return err / scale


def short_time_residual(sites: Sites, rule: SpectralRule, kind: str = "E") -> float:
    """Distance of the t = 0 functional from its canonical value, relative to it.

    E(0) = -Pi and A(0) = A; the residual is the largest entry of the
    difference (bath rows weighted by sqrt of the quadrature weights) over the
    unit scale 1/dz.
    """
    traj = field_coefficients(sites, rule, kind, 0.0, pad=4)
    O = traj.coefficients[0]
    n, dz, pad = sites.n, sites.dz, traj.pad
    target = {k: np.zeros_like(O.blocks[k]) for k in BLOCKS}
    name, sign = {"E": ("Pi", -1.0), "A": ("A", 1.0), "X": ("X", 1.0)}[kind]
    target[name][np.arange(n), pad + np.arange(n)] = sign / dz
    err = max(float(np.abs(O.blocks[k] - target[k]).max()) for k in BLOCKS)
    sw = np.sqrt(rule.bath_weights)
    err = max(err, *(float(np.abs(b * sw).max()) for b in O.bath_grid))
    return err * dz


def functional_norm(O: OperatorCoefficients, nonbath: bool = True, bath: bool = True) -> float:
    """Euclidean norm of the rows in orthonormal coordinates (site weight dz, node weight)."""
    dz = O.sites.dz
    s = 0.0
    if nonbath:
        s += dz * sum(float(np.sum(np.abs(O.blocks[k]) ** 2)) for k in BLOCKS)
    if bath:
        w = O.bath_weights
        s += dz * sum(float(np.sum(np.abs(b) ** 2 * w)) for b in O.bath_grid)
    return float(np.sqrt(s))


def _difference(O1: OperatorCoefficients, O2: OperatorCoefficients) -> OperatorCoefficients:
    D = O1.copy()
    D.blocks = {k: O1.blocks[k] - O2.blocks[k] for k in BLOCKS}
    D.bath_grid = tuple(a - b for a, b in zip(O1.bath_grid, O2.bath_grid))
    return D


@dataclass
class LongTimeReport:
    times: np.ndarray
    relative_gap: np.ndarray          # ||full - J_l form|| / ||full||
    nonbath_norm: np.ndarray          # norm of the non-bath blocks of the full field
    bath_norm: np.ndarray
    decay_rate: float                 # fitted from log(nonbath_norm) over the window


def long_time_report(sites: Sites, rule: SpectralRule, kind: str, times,
                     pad: int | None = None) -> LongTimeReport:
    times = np.asarray(times, float)
    pad = default_pad(sites, float(times.max())) if pad is None else pad
    full = field_coefficients(sites, rule, kind, times, pad)
    lt = long_time_field(sites, rule, kind, times, pad)
    gap, nb, bn = [], [], []
    for O, L in zip(full.coefficients, lt.coefficients):
        total = functional_norm(O)
        gap.append(functional_norm(_difference(O, L)) / total)
        nb.append(functional_norm(O, bath=False))
        bn.append(functional_norm(O, nonbath=False))
    nb = np.array(nb)
    rate = -np.polyfit(times, np.log(nb), 1)[0] if len(times) > 1 else float("nan")
    return LongTimeReport(times, np.array(gap), nb, np.array(bn), float(rate))


def long_time_commutators(sites: Sites, omega, weights):
    """[J_l, J_l^+] and [J_l, J_l] kernels on the same grid as J."""
    return jj_commutators(sites, omega, weights, rows=long_time_noise_current(sites, omega))


@dataclass
class CommutatorReport:
    t: float
    diag: np.ndarray                  # [E(z_i, t), A(z_i, t)] * dz / i
    offdiag_max: float                # max off-diagonal / max diagonal

    @property
    def diag_residual(self) -> float:
        return float(np.max(np.abs(self.diag - 1)))


def equal_time_commutator(sites: Sites, rule: SpectralRule, t: float,
                          pad: int | None = None) -> CommutatorReport:
    """[E(z, t), A(z', t)] through the canonical pairing; expected i/dz on the diagonal."""
    E = field_coefficients(sites, rule, "E", t, pad)
    A = field_coefficients(sites, rule, "A", t, E.pad)
    reg, _ = commutator_matrix(E.coefficients[0], A.coefficients[0])
    M = reg * sites.dz / 1j
    d = np.diag(M)
    off = M - np.diag(d)
    return CommutatorReport(float(t), d, float(np.abs(off).max() / np.abs(d).max()))


def trajectory(sites: Sites, rule: SpectralRule, kind: str, times, data: ClassicalData,
               pad: int) -> FieldTrajectory:
    """kind(z_i, t) for classical initial data given on the ``pad``-padded columns."""
    times = np.asarray(times, float)
    if np.any(times < 0):
        raise DomainError("field trajectories are evaluated for t >= 0 only")
    provider, cols = table_provider(sites, kind, pad)
    if data.A.shape[-1] != cols.n:
        raise ValueError("initial data must live on the padded columns")
    vals = history(provider, cols, times, rule, data)
    return FieldTrajectory(times, kind, values=vals, pad=pad)
