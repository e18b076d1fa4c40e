"""Susceptibility of the damped oscillator medium with a Debye-cutoff bath.

For the Debye coupling law the bath self energy has a closed form, so the
Laplace-domain denominator is

    Dbar(p) = p^2 + omega0^2 + gamma*Lambda*p/(Lambda + p)

and chi(omega) is its boundary value at p = -i*omega, taken exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .medium import DomainError, Layer, SpectralGrid, coupling_v, renormalized_frequency_sq


def denominator_laplace(omega0, gamma, lam, p):
    p = np.asarray(p, dtype=complex)
    return p * p + omega0**2 + gamma * lam * p / (lam + p)


def denominator_omega(omega0, gamma, lam, omega):
    """Dbar(-i omega + 0) for real omega (any sign)."""
    w = np.asarray(omega, dtype=float)
    w2 = w * w
    den = lam**2 + w2
    return (omega0**2 - w2 + gamma * lam * w2 / den) - 1j * gamma * lam**2 * w / den


def chi_from_params(a, omega0, gamma, lam, omega):
    """chi(omega) for oscillator strength a = alpha^2/rho; broadcasts."""
    return a / denominator_omega(omega0, gamma, lam, omega)


def chi_derivative_omega(a, omega0, gamma, lam, omega):
    """d chi / d omega on the real axis (chi is analytic, D(omega) = Dbar(-i omega))."""
    p = -1j * np.asarray(omega, dtype=float)
    dDbar = 2 * p + gamma * lam**2 / (lam + p) ** 2
    D = denominator_laplace(omega0, gamma, lam, p)
    return a * 1j * dDbar / D**2


def chi_laplace(layer: Layer, p: complex) -> complex:
    p = complex(p)
    if p.real <= 0:
        raise DomainError("chi_laplace needs Re p > 0; use chi_omega on the imaginary axis")
    D = denominator_laplace(layer.omega0, layer.gamma, layer.cutoff_lambda, p)
    return complex(layer.coupling_sq / D)


def _bath_self_energy_quad(layer: Layer, p: complex) -> complex:
    """rho^-2 int_0^inf w^2 v^2/(p^2+w^2) dw by adaptive quadrature."""
    rho = layer.rho

    def f(w, part):
        val = w * w * coupling_v(layer, w) ** 2 / (p * p + w * w) / rho**2
        return val.real if part == 0 else val.imag

    scale = max(abs(p), layer.cutoff_lambda)
    pieces = [0.0, abs(p), scale, 10 * scale, np.inf]
    tot = 0j
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        if hi <= lo:
            continue
        re = integrate.quad(f, lo, hi, args=(0,), epsabs=0, epsrel=1e-13, limit=400)[0]
        im = integrate.quad(f, lo, hi, args=(1,), epsabs=0, epsrel=1e-13, limit=400)[0]
        tot += re + 1j * im
    return tot


def chi_laplace_quadrature(layer: Layer, p: complex) -> complex:
    """Same quantity with the bath integral done numerically (oracle for the closed form)."""
    p = complex(p)
    D = p * p + renormalized_frequency_sq(layer) - _bath_self_energy_quad(layer, p)
    return layer.coupling_sq / D


def chi_omega(layer: Layer, omega, conjugate: bool = False):
    """chi at real omega > 0; conjugate=True returns chi(-omega) = chi(omega)*."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("chi_omega needs omega > 0")
    out = chi_from_params(layer.coupling_sq, layer.omega0, layer.gamma, layer.cutoff_lambda, w)
    if conjugate:
        out = np.conj(out)
    return complex(out) if out.ndim == 0 else out


# --- analyticity probe ------------------------------------------------------

@dataclass(frozen=True)
class SuspectedZero:
    p: complex
    abs_denominator: float
    margin: bool  # sits on Re p = 0, the edge of the half plane


def denominator_zero_scan(layer: Layer, region=((0.01, 10.0), (-10.0, 10.0)), n: int = 201,
                          threshold: float = 1e-8) -> list[SuspectedZero]:
    """Scan |Dbar| over a rectangle, polish local minima with Newton, report zeros found."""
    (re0, re1), (im0, im1) = region
    if re0 < 0:
        raise DomainError("scan region must lie in Re p >= 0")
    w0, g, lam = layer.omega0, layer.gamma, layer.cutoff_lambda
    X, Y = np.meshgrid(np.linspace(re0, re1, n), np.linspace(im0, im1, n), indexing="ij")
    P = X + 1j * Y
    mag = np.abs(denominator_laplace(w0, g, lam, P))
    pad = np.pad(mag, 1, constant_values=np.inf)
    core = pad[1:-1, 1:-1]
    is_min = np.ones_like(core, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= core <= pad[1 + di:n + 1 + di, 1 + dj:n + 1 + dj]
    seeds = P[is_min]
    found: list[SuspectedZero] = []
    h = max(re1 - re0, im1 - im0) / (n - 1)
    for p in seeds:
        for _ in range(60):
            D = denominator_laplace(w0, g, lam, p)
            dD = 2 * p + g * lam**2 / (lam + p) ** 2
            if dD == 0:
                break
            step = D / dD
            p = p - step
            if abs(step) < 1e-15 * max(1.0, abs(p)):
                break
        val = float(abs(denominator_laplace(w0, g, lam, p)))
        tol_edge = 1e-9 * max(1.0, abs(p))
        inside = (re0 - tol_edge <= p.real <= re1 + h) and (im0 - h <= p.imag <= im1 + h)
        if val < threshold * max(1.0, abs(p) ** 2) and inside:
            if not any(abs(p - z.p) < 1e-8 * max(1.0, abs(p)) for z in found):
                found.append(SuspectedZero(complex(p), val, abs(p.real) <= tol_edge))
    found.sort(key=lambda z: (z.p.imag, z.p.real))
    return found


# --- Kramers-Kronig ---------------------------------------------------------

def pv_half_line(f: np.ndarray, grid: SpectralGrid, fprime: np.ndarray | None = None) -> np.ndarray:
    """PV int_0^Omega f(w')/(w'^2 - w_m^2) dw' at every node w_m.

    Midpoint rule after subtracting f(w_m); the subtracted piece is integrated
    exactly, and at the pole node the regular integrand is replaced by its
    limit f'(w_m)/(2 w_m). Pass fprime when it is known; otherwise a
    second-order difference is used.
    """
    w = grid.omega_nodes
    h = grid.omega_weights
    Om = grid.omega_max
    f = np.asarray(f)
    diff = f[None, :] - f[:, None]
    den = w[None, :] ** 2 - w[:, None] ** 2
    np.fill_diagonal(den, 1.0)
    reg = diff / den
    fp = np.gradient(f, w, edge_order=2) if fprime is None else np.asarray(fprime)
    reg[np.diag_indices_from(reg)] = fp / (2 * w)
    out = reg @ h
    out += f * np.log((Om - w) / (Om + w)) / (2 * w)
    return out


def _chi_i_tail_model_pv(layer: Layer, omega: np.ndarray, Om: float) -> np.ndarray:
    """PV int_Om^inf w' chi_i(w')/(w'^2 - w^2) with chi_i ~ a gamma L^2/(w'^3 (L^2 + w'^2))."""
    a, g, L = layer.coupling_sq, layer.gamma, layer.cutoff_lambda
    w2 = omega**2
    A = -1.0 / (L**2 * w2)
    B = 1.0 / (L**2 * (L**2 + w2))
    C = 1.0 / ((w2 + L**2) * w2)
    theta = np.pi / 2 - np.arctan(Om / L)
    i_x = 1.0 / Om
    i_l = theta / L
    i_w = np.log((Om + omega) / (Om - omega)) / (2 * omega)
    return a * g * L**2 * (A * i_x + B * i_l + C * i_w)


def kk_real_part(layer: Layer, grid: SpectralGrid, tail: bool = True) -> np.ndarray:
    """Re chi from (2/pi) PV int_0^inf w' Im chi(w')/(w'^2 - w^2) dw'."""
    w = grid.omega_nodes
    chi = chi_omega(layer, w)
    dchi = chi_derivative_omega(layer.coupling_sq, layer.omega0, layer.gamma,
                                layer.cutoff_lambda, w)
    re = (2 / np.pi) * pv_half_line(w * chi.imag, grid, chi.imag + w * dchi.imag)
    if tail:
        re += (2 / np.pi) * _chi_i_tail_model_pv(layer, w, grid.omega_max)
    return re


def kramers_kronig_residual(layer: Layer, grid: SpectralGrid, tail: bool = True,
                            interior: float = 0.5) -> float:
    """max |Re chi_KK - Re chi| / max |chi| over nodes below interior*omega_max."""
    w = grid.omega_nodes
    chi = chi_omega(layer, w)
    mask = w <= interior * grid.omega_max
    if layer.coupling_sq == 0:
        return 0.0
    dev = np.abs(kk_real_part(layer, grid, tail) - chi.real)[mask]
    return float(dev.max() / np.abs(chi).max())


# --- sum rules ----------------------------------------------------------------

def _tail_first_moment(layer: Layer, Om: float) -> float:
    """int_Om^inf w chi_i dw from the leading large-omega model."""
    a, g, L = layer.coupling_sq, layer.gamma, layer.cutoff_lambda
    theta = np.pi / 2 - np.arctan(Om / L)
    return a * g * L**2 * (1 / Om - theta / L) / L**2


def _tail_third_moment(layer: Layer, Om: float) -> float:
    """int_Om^inf w^3 chi_i dw with the next-order correction to 1/|D|^2."""
    a, g, L, w0 = layer.coupling_sq, layer.gamma, layer.cutoff_lambda, layer.omega0
    theta = np.pi / 2 - np.arctan(Om / L)
    i1 = theta / L
    i_inv = (1 / Om - theta / L) / L**2
    i_sq = theta / (2 * L**3) - Om / (2 * L**2 * (L**2 + Om**2))
    return a * g * L**2 * (i1 + 2 * w0**2 * i_inv + 2 * g * L * i_sq)


def chi_sum_rules(layer: Layer, grid: SpectralGrid, tail: bool = True):
    """Full-line first and third moments of chi, folded onto omega > 0.

    Returns (residual_a, residual_b, value_a, value_b, target_a, target_b).
    Residuals are relative, or absolute when the coupling vanishes.
    """
    w, h = grid.omega_nodes, grid.omega_weights
    chi_i = chi_omega(layer, w).imag
    m1 = float(np.sum(h * w * chi_i))
    m3 = float(np.sum(h * w**3 * chi_i))
    if tail:
        m1 += _tail_first_moment(layer, grid.omega_max)
        m3 += _tail_third_moment(layer, grid.omega_max)
    va, vb = 2j * m1, 2j * m3
    a = layer.coupling_sq
    ta = 1j * np.pi * a
    tb = 1j * np.pi * a * renormalized_frequency_sq(layer)
    if a == 0:
        return abs(va), abs(vb), va, vb, ta, tb
    return abs(va - ta) / abs(ta), abs(vb - tb) / abs(tb), va, vb, ta, tb


def bath_auxiliary_identity_residual(layer: Layer, p: complex, p2: complex) -> float:
    """Both sides of the two-argument bath integral identity; relative difference."""
    p, p2 = complex(p), complex(p2)
    if p.real <= 0 or p2.real <= 0:
        raise DomainError("both arguments need Re p > 0")
    if abs(p - p2) <= 1e-14 * max(1.0, abs(p)):
        raise DomainError("degenerate arguments p == p2; the derivative form is not provided")

    def f(w, part):
        val = w * w * coupling_v(layer, w) ** 2 / ((p * p + w * w) * (p2 * p2 + w * w))
        return val.real if part == 0 else val.imag

    brk = sorted({abs(p), abs(p2), layer.cutoff_lambda})
    pieces = [0.0, *brk, 10 * brk[-1], np.inf]
    lhs = 0j
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        if hi <= lo:
            continue
        lhs += integrate.quad(f, lo, hi, args=(0,), epsabs=0, epsrel=1e-12, limit=400)[0]
        lhs += 1j * integrate.quad(f, lo, hi, args=(1,), epsabs=0, epsrel=1e-12, limit=400)[0]
    rho = layer.rho
    Dp = denominator_laplace(layer.omega0, layer.gamma, layer.cutoff_lambda, p)
    Dq = denominator_laplace(layer.omega0, layer.gamma, layer.cutoff_lambda, p2)
    # alpha^2 rho / chi = rho^2 Dbar, so the closed side never divides by alpha
    rhs = -rho**2 + rho**2 * (Dp - Dq) / (p * p - p2 * p2)
    scale = max(abs(lhs), abs(rhs))
    if scale < 1e-300:
        return 0.0
    if scale < 1e-14:
        return float(abs(lhs - rhs))
    return float(abs(lhs - rhs) / scale)
