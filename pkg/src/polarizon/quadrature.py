"""Quadrature helpers shared by the frequency integrals."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def adaptive_quad_batched(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                          points: Sequence[float] = (), epsrel: float = 1e-8,
                          epsabs: float = 0.0, n: int = 10, max_rounds: int = 60,
                          max_intervals: int = 20000, return_panels: bool = False,
                          chunk: int | None = None, chunk_elems: int = 2_000_000):
    """Adaptive Gauss-Legendre for vector-valued integrands that are cheap in batches.

    f maps an array of abscissae (m,) to values (m, ...).  Every refinement
    round evaluates all active intervals in one call.  The error of a panel is
    the difference between n- and 2n-point rules.  Returns (integral,
    L1-norm estimate, error estimate).
    """
    xs, ws = _gl(n)
    x2, w2 = _gl(2 * n)
    edges = sorted({float(a), float(b), *[float(p) for p in points if a < p < b]})
    todo = list(zip(edges[:-1], edges[1:]))
    done_val = 0.0
    done_l1 = 0.0
    done_err = 0.0
    panels = []
    step = chunk
    for _ in range(max_rounds):
        if not todo:
            break
        lo = np.array([t[0] for t in todo])
        hi = np.array([t[1] for t in todo])
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        m = len(todo)
        I1, I2, L1 = [], [], []
        a0 = 0
        while a0 < m:
            sl = slice(a0, min(m, a0 + (step or 4)))
            a0 = sl.stop
            k = sl.stop - sl.start
            nodes = np.concatenate([(mid[sl, None] + half[sl, None] * xs).ravel(),
                                    (mid[sl, None] + half[sl, None] * x2).ravel()])
            vals = np.asarray(f(nodes))
            tail = vals.shape[1:]
            if step is None:
                # later batches hold about chunk_elems integrand values
                step = max(1, chunk_elems // (3 * n * max(1, int(np.prod(tail)))))
            v1 = vals[: k * n].reshape((k, n, -1))
            v2 = vals[k * n:].reshape((k, 2 * n, -1))
            I1.append(np.einsum("mkj,k->mj", v1, ws) * half[sl, None])
            I2.append(np.einsum("mkj,k->mj", v2, w2) * half[sl, None])
            L1.append(np.einsum("mkj,k->mj", np.abs(v2), w2) * half[sl, None])
            del vals, v1, v2
        I1, I2, L1 = np.concatenate(I1), np.concatenate(I2), np.concatenate(L1)
        err = np.abs(I2 - I1).max(axis=1)
        scale = max(epsabs, epsrel * float(np.max(done_l1 + L1.sum(axis=0))))
        # error density test: each panel gets a share of the budget by width
        accept = err <= scale * (hi - lo) / (b - a)
        accept |= half < 1e-13 * max(1.0, abs(b))
        if 2 * m > max_intervals:
            accept[:] = True
        done_val = done_val + I2[accept].sum(axis=0)
        done_l1 = done_l1 + L1[accept].sum(axis=0)
        done_err += float(err[accept].sum())
        panels.extend(zip(lo[accept], hi[accept]))
        bad = np.nonzero(~accept)[0]
        todo = [(lo[i], mid[i]) for i in bad] + [(mid[i], hi[i]) for i in bad]
    if todo:
        raise RuntimeError("adaptive quadrature did not converge")
    out = (np.reshape(done_val, tail), np.reshape(done_l1, tail), done_err)
    if return_panels:
        return out + (sorted({float(e) for pnl in panels for e in pnl}),)
    return out


def gauss_panels(edges: Sequence[float], n: int = 16):
    """Nodes and weights of composite Gauss-Legendre on consecutive edges."""
    xs, ws = _gl(n)
    e = np.asarray(edges, float)
    lo, hi = e[:-1], e[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * xs).ravel()
    weights = (half[:, None] * ws).ravel()
    return nodes, weights


def frequency_rule(omega_max: float, h: float, upper: float, n: int = 12,
                   growth: float = 1.25, points: Sequence[float] = ()):
    """Composite GL on [0, upper]: panels of width <= h up to omega_max, then
    geometrically growing panels.  Extra breakpoints in ``points`` are kept
    (adaptively found edges can be passed this way)."""
    m = max(1, int(np.ceil(omega_max / h)))
    edges = list(np.linspace(0.0, omega_max, m + 1))
    e, step = omega_max, h
    while e < upper:
        step *= growth
        e = min(upper, e + step)
        edges.append(e)
    edges = sorted(set(edges) | {float(p) for p in points if 0 < p < upper})
    return gauss_panels(edges, n)


class HalfLinePV:
    """PV int_0^U g(w) / (x_k - w^2) dw at targets w_k in (0, U), with x_k = w_k^2.

    The integrand is split as [g(w) - g(w_k)] / (x_k - w^2) + g(w_k) / (x_k - w^2);
    the first piece is smooth and goes to the composite rule, the second is
    integrated in closed form.  g is needed on the rule's nodes and at the
    targets.
    """

    def __init__(self, nodes: np.ndarray, weights: np.ndarray, targets: np.ndarray, upper: float):
        self.nodes = np.asarray(nodes, float)
        self.weights = np.asarray(weights, float)
        self.targets = np.asarray(targets, float)
        wk = self.targets
        self.D = self.weights[None, :] / (wk[:, None] ** 2 - self.nodes[None, :] ** 2)  # (K, N)
        closed = np.log((upper + wk) / (upper - wk)) / (2 * wk)
        self.corr = self.D.sum(axis=1) - closed

    def __call__(self, g_nodes: np.ndarray, g_targets: np.ndarray) -> np.ndarray:
        """Frequency is the last axis of both arguments; returns (..., K)."""
        return g_nodes @ self.D.T - g_targets * self.corr

    def plemelj(self, g_nodes, g_targets, sign: int) -> np.ndarray:
        """int g / (x_k - (w -+ i0)^2): PV +- i pi g(w_k) / (2 w_k)."""
        return self(g_nodes, g_targets) + sign * 1j * np.pi * g_targets / (2 * self.targets)
