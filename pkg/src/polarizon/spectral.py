"""Frequency-integrated linear functionals of the canonical fields.

A field at time t built from the noise current has the form

    O(z, t) = int_0^inf dw e^{-i w t} [F(z, w) . (A, Pi, X, P)
              + bath part with poles at w'' = w + i0 and w'' = -w + i0] + h.c.

A *provider* returns, at a batch of real frequencies, the non-bath coefficient
rows F (K, T, 4, C) and the two pole amplitudes Fa, Fb (K, T, C) over C
columns.  The bath coefficients follow as

    f_Y = v x'' C_Y,  f_Q = (v / rho) C_Q,
    C = int dw [u / (x'' - w^2 - i0) + conj(u) / (x'' - w^2 + i0)],

with u = e^{-iwt} Fa + conj(e^{-iwt} Fb) for Y and the same with an extra
factor i w on both amplitudes for Q.  The principal value is taken on a
composite rule that extends well past the bath grid; the delta part lands on
the bath nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .medium import Sites
from .greenfn import chi_sites, lattice_green
from .quadrature import HalfLinePV, adaptive_quad_batched, frequency_rule

Provider = Callable[[np.ndarray], tuple]


@dataclass
class SpectralRule:
    nodes: np.ndarray
    weights: np.ndarray
    bath_nodes: np.ndarray
    bath_weights: np.ndarray
    upper: float
    pv: HalfLinePV

    @property
    def size(self) -> int:
        return len(self.nodes)


def spectral_rule(sites: Sites, bath_nodes, bath_weights, h: float | None = None,
                  upper: float | None = None, n: int = 12, t_max: float = 0.0,
                  proxy_tol: float = 1e-7) -> SpectralRule:
    """Composite rule resolving resonances (panel <= gamma/3) and e^{-iwt} up to t_max."""
    bath_nodes = np.asarray(bath_nodes, float)
    gmin = float(min(sites.gamma.min(), sites.exterior.gamma))
    if h is None:
        h = min(0.1, gmin / 3, 2.0 / (t_max + 1.0))
    top = max(1.02 * bath_nodes.max(), 2.5 / sites.dz,
              3 * max(sites.omega0.max(), sites.exterior.omega0))
    upper = upper or 200 * top
    edge = 2 / sites.dz
    pts = [edge, *sites.omega0, sites.exterior.omega0]
    # panel edges refined on cheap local quantities (diagonal of Im G, Im chi)
    *_, edges = adaptive_quad_batched(lambda w: _proxy(sites, w), 0.0, top, points=pts,
                                      epsrel=proxy_tol, n=n, return_panels=True)
    nodes, weights = frequency_rule(top, h, upper, n, points=edges)
    return SpectralRule(nodes, weights, bath_nodes, np.asarray(bath_weights, float), upper,
                        HalfLinePV(nodes, weights, bath_nodes, upper))


def _proxy(sites: Sites, w: np.ndarray) -> np.ndarray:
    G = lattice_green(sites, w).G
    d = np.diagonal(G, axis1=1, axis2=2).imag
    chii = chi_sites(sites, w).imag
    W = w[:, None]
    return np.concatenate([W * d, W**3 * d * chii, chii], axis=1)


def _chunks(N: int, size: int):
    for a in range(0, N, size):
        yield slice(a, min(N, a + size))


def functional_at(provider: Provider, cols: Sites, times, rule: SpectralRule,
                  chunk: int = 128):
    """Explicit coefficient functionals at each time: list of (blocks (T, 4, C), f_Y, f_Q).

    f_Y, f_Q have shape (T, C, K) on the bath nodes.
    """
    times = np.atleast_1d(np.asarray(times, float))
    nt = len(times)
    acc = None
    for sl in _chunks(rule.size, chunk):
        w, W = rule.nodes[sl], rule.weights[sl]
        F, Fa, Fb = provider(w)
        k, T, C = Fa.shape
        ph = np.exp(-1j * np.outer(times, w))                         # (nt, k)
        Dt = rule.pv.D[:, sl].T                                       # (k, K)
        nb = np.tensordot(ph * W, F, axes=(1, 0))                     # (nt, T, 4, C)
        pa = ph[:, :, None, None] * Fa[None]
        pb = ph[:, :, None, None] * Fb[None]
        uY = pa + np.conj(pb)
        uQ = 1j * w[None, :, None, None] * (pa - np.conj(pb))
        pY = (uY.reshape(nt, k, T * C).transpose(0, 2, 1) @ Dt).reshape(nt, T, C, -1)
        pQ = (uQ.reshape(nt, k, T * C).transpose(0, 2, 1) @ Dt).reshape(nt, T, C, -1)
        if acc is None:
            acc = [nb, pY, pQ]
        else:
            acc[0] += nb
            acc[1] += pY
            acc[2] += pQ
    wk = rule.bath_nodes
    F, Fa, Fb = provider(wk)
    ph = np.exp(-1j * np.outer(times, wk))[:, :, None, None]
    uY = np.moveaxis(ph * Fa[None] + np.conj(ph * Fb[None]), 1, -1)          # (nt, T, C, K)
    uQ = np.moveaxis(1j * wk[None, :, None, None] * ph * Fa[None]
                     + np.conj(1j * wk[None, :, None, None] * ph * Fb[None]), 1, -1)
    v = cols.v(wk)                                                   # (C, K)
    out = []
    for i in range(len(times)):
        CY = 2 * (acc[1][i] - uY[i] * rule.pv.corr).real - np.pi * uY[i].imag / wk
        CQ = 2 * (acc[2][i] - uQ[i] * rule.pv.corr).real - np.pi * uQ[i].imag / wk
        fY = v[None] * wk**2 * CY
        fQ = v[None] * CQ / cols.rho[None, :, None]
        out.append((2 * acc[0][i].real, fY, fQ))
    return out


@dataclass
class ClassicalData:
    """Real initial values of the canonical fields on C columns and K bath nodes."""
    A: np.ndarray
    Pi: np.ndarray
    X: np.ndarray
    P: np.ndarray
    Y: np.ndarray           # (C, K)
    Q: np.ndarray

    def blocks(self) -> np.ndarray:
        return np.stack([self.A, self.Pi, self.X, self.P])


def history(provider: Provider, cols: Sites, times, rule: SpectralRule, data: ClassicalData,
            chunk: int = 256) -> np.ndarray:
    """Field values (nt, T) obtained by contracting with classical data first.

    The contraction is folded into one spectral amplitude s on the rule nodes
    and the bath nodes, so that O(t) = Re sum e^{-iwt} s.
    """
    times = np.atleast_1d(np.asarray(times, float))
    dz = cols.dz
    wk, wt = rule.bath_nodes, rule.bath_weights
    v = cols.v(wk)
    yY = dz * wt[None, :] * v * wk[None, :] ** 2 * data.Y                   # (C, K)
    yQ = dz * wt[None, :] * v * data.Q / cols.rho[:, None]
    d = data.blocks()
    out = None
    for sl in _chunks(rule.size, chunk):
        w, W = rule.nodes[sl], rule.weights[sl]
        F, Fa, Fb = provider(w)
        D = rule.pv.D[:, sl]
        gY = 2 * yY @ D                                                     # (C, k)
        gQ = 2 * yQ @ D
        s = 2 * W[:, None] * dz * np.einsum("kzbc,bc->kz", F, d)
        s = s + np.einsum("kzc,ck->kz", Fa + Fb, gY)
        s = s + 1j * w[:, None] * np.einsum("kzc,ck->kz", Fa + Fb, gQ)
        part = (np.exp(-1j * np.outer(times, w)) @ s).real
        out = part if out is None else out + part
    F, Fa, Fb = provider(wk)
    hY = yY * (-2 * rule.pv.corr + 1j * np.pi / wk)[None, :]
    hQ = yQ * (-2 * rule.pv.corr + 1j * np.pi / wk)[None, :]
    s = (np.einsum("kzc,ck->kz", Fa, hY) + np.einsum("kzc,ck->kz", Fb, np.conj(hY))
         + 1j * wk[:, None] * (np.einsum("kzc,ck->kz", Fa, hQ)
                               + np.einsum("kzc,ck->kz", Fb, np.conj(hQ))))
    return out + (np.exp(-1j * np.outer(times, wk)) @ s).real
