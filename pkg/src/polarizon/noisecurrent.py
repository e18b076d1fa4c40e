"""Noise-current density as an explicit linear functional of the t = 0 canonical fields.

Every operator built here is linear in A, Pi, X, P on the lattice sites and in
the bath fields Y_w, Q_w, so it is stored as a batch of coefficient rows
(``OperatorCoefficients``).  Commutators of two such operators are c-numbers
given by the canonical pairing.

The bath part of a row is kept in closed form.  A row's Y and Q coefficients
at site s and bath frequency w'' are

    f_Y = v_s(w'') w''^2 C_s(w''),    f_Q = v_s(w'') (kappa/rho_s) C_s(w''),
    C_s(w'') = sum_p amp_p[s] / (w''^2 - w_p^2),

with one pole w_p per term (Im w_p >= 0; a real w_p means w_p + i0) and
kappa_p = beta_p w_p.  For the Debye bath the frequency integrals of products
of such terms are rational, so pairings are exact.  Coincident real poles
produce a delta in the difference of the two operators' frequencies; its
coefficient is returned separately.

Outside the slab every row continues geometrically:
value(site N - 1 + n) = value(first exterior site) * ratio^(n - 1), same on
the left.  Tails of different rows combine through 1 / (1 - r1 r2).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .greenfn import (LatticeGreen, chi_exterior, chi_over_alpha_sites, chi_sites,
                      lattice_green)
from .medium import DomainError, Sites

BLOCKS = ("A", "Pi", "X", "P")


# --- coefficient rows ---------------------------------------------------------

@dataclass
class Pole:
    """One bath pole shared by a batch of rows; arrays have leading dimension R."""
    w: np.ndarray
    beta: np.ndarray
    amp: np.ndarray                     # (R, n) on the interior sites
    left: np.ndarray                    # (R,) amplitude at the first exterior site
    right: np.ndarray

    def take(self, idx) -> "Pole":
        return Pole(self.w[idx], self.beta[idx], self.amp[idx], self.left[idx], self.right[idx])

    def scaled(self, c) -> "Pole":
        c = np.asarray(c)
        return Pole(self.w, self.beta, self.amp * c[:, None], self.left * c, self.right * c)


@dataclass
class OperatorCoefficients:
    """Coefficient rows of R linear operators.

    ``blocks[k]`` has shape (R, n) for k in A, Pi, X, P.  ``left``/``right``
    hold the (R, 4) block values at the first exterior site, continued with
    ratios ``rl``/``rr``.  ``poles`` is the closed-form bath part; optional
    ``bath_grid`` = (f_Y, f_Q) of shape (R, n, n_omega) is a bath part sampled on
    the spectral grid with weights ``bath_weights``.
    """
    sites: Sites = field(repr=False)
    blocks: dict
    left: np.ndarray
    right: np.ndarray
    rl: np.ndarray
    rr: np.ndarray
    poles: list = field(default_factory=list)
    omega: np.ndarray | None = None
    bath_grid: tuple | None = None
    bath_nodes: np.ndarray | None = None
    bath_weights: np.ndarray | None = None

    @property
    def R(self) -> int:
        return self.blocks["A"].shape[0]

    @property
    def n(self) -> int:
        return self.blocks["A"].shape[1]

    @classmethod
    def zeros(cls, sites: Sites, R: int) -> "OperatorCoefficients":
        z = {k: np.zeros((R, sites.n), complex) for k in BLOCKS}
        return cls(sites, z, np.zeros((R, 4), complex), np.zeros((R, 4), complex),
                   np.zeros(R, complex), np.zeros(R, complex))

    @classmethod
    def unit(cls, sites: Sites, field_name: str, index) -> "OperatorCoefficients":
        """The canonical field itself at the given site(s): a delta column / dz."""
        idx = np.atleast_1d(index)
        out = cls.zeros(sites, len(idx))
        out.blocks[field_name][np.arange(len(idx)), idx] = 1 / sites.dz
        return out

    def copy(self) -> "OperatorCoefficients":
        return replace(self, blocks={k: v.copy() for k, v in self.blocks.items()},
                       left=self.left.copy(), right=self.right.copy(),
                       poles=[replace(p) for p in self.poles])

    def take(self, idx) -> "OperatorCoefficients":
        idx = np.atleast_1d(idx)
        bg = None if self.bath_grid is None else tuple(b[idx] for b in self.bath_grid)
        return replace(self, blocks={k: v[idx] for k, v in self.blocks.items()},
                       left=self.left[idx], right=self.right[idx], rl=self.rl[idx],
                       rr=self.rr[idx], poles=[p.take(idx) for p in self.poles],
                       omega=None if self.omega is None else self.omega[idx], bath_grid=bg)

    def scaled(self, c) -> "OperatorCoefficients":
        """Row-wise multiplication by c (shape (R,) or scalar)."""
        c = np.broadcast_to(np.asarray(c, complex), (self.R,))
        bg = None if self.bath_grid is None else tuple(b * c[:, None, None] for b in self.bath_grid)
        return replace(self, blocks={k: v * c[:, None] for k, v in self.blocks.items()},
                       left=self.left * c[:, None], right=self.right * c[:, None],
                       poles=[p.scaled(c) for p in self.poles], bath_grid=bg)

    def __add__(self, other: "OperatorCoefficients") -> "OperatorCoefficients":
        if self.n != other.n or self.R != other.R:
            raise ValueError("operator rows on different grids")
        rl = _merge_ratio(self.rl, self.left, other.rl, other.left)
        rr = _merge_ratio(self.rr, self.right, other.rr, other.right)
        if self.bath_grid is not None or other.bath_grid is not None:
            raise NotImplementedError("adding sampled bath parts is not supported")
        return replace(self, blocks={k: self.blocks[k] + other.blocks[k] for k in BLOCKS},
                       left=self.left + other.left, right=self.right + other.right,
                       rl=rl, rr=rr, poles=list(self.poles) + list(other.poles))

    def conj(self) -> "OperatorCoefficients":
        """Coefficients of the hermitian conjugate operators."""
        poles = []
        for p in self.poles:
            # conj(1/(x - w^2)) = 1/(x - conj(w)^2); keep the pole in the upper half plane
            w = -np.conj(p.w)
            beta = -np.conj(p.beta)       # kappa* = conj(beta) conj(w) = (-conj beta) w_new
            poles.append(Pole(w, beta, np.conj(p.amp), np.conj(p.left), np.conj(p.right)))
        bg = None if self.bath_grid is None else tuple(np.conj(b) for b in self.bath_grid)
        return replace(self, blocks={k: np.conj(v) for k, v in self.blocks.items()},
                       left=np.conj(self.left), right=np.conj(self.right),
                       rl=np.conj(self.rl), rr=np.conj(self.rr), poles=poles, bath_grid=bg)

    def combined_poles(self, tol: float = 1e-13) -> list:
        """Poles merged when (w, beta) coincide row by row, for comparisons."""
        out: list[Pole] = []
        for p in self.poles:
            for q in out:
                if np.allclose(q.w, p.w, rtol=0, atol=tol * (1 + np.abs(p.w).max())) and \
                        np.allclose(q.beta, p.beta):
                    q.amp = q.amp + p.amp
                    q.left = q.left + p.left
                    q.right = q.right + p.right
                    break
            else:
                out.append(Pole(p.w, p.beta, p.amp.copy(), p.left.copy(), p.right.copy()))
        return out

    def bath_on_grid(self, nodes: np.ndarray, weights: np.ndarray):
        """Sampled (f_Y, f_Q) with Sokhotski-Plemelj split of real poles.

        Real poles sitting on a node put their delta weight 1/(2 w weight) on
        that node and drop the principal-value sample there (midpoint rule).
        """
        R, n = self.R, self.n
        x = nodes**2
        v = self.sites.v(nodes)                                     # (n, K)
        C_Y = np.zeros((R, n, len(nodes)), complex)
        C_Q = np.zeros_like(C_Y)
        for p in self.poles:
            den = x[None, :] - p.w[:, None] ** 2                    # (R, K)
            real = np.abs(p.w.imag) < 1e-14
            on = real[:, None] & (np.abs(nodes[None, :] - np.abs(p.w.real)[:, None])
                                  < 1e-9 * nodes.max())
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(on, 0.0, 1 / den)
            # delta part: 1/(x - (w + i0)^2) -> +- i pi delta(x - w^2)
            sgn = np.sign(p.w.real)
            dpart = np.where(on, 1j * np.pi * sgn[:, None] / (2 * nodes[None, :] * weights[None, :]),
                             0.0)
            g = g + dpart
            kap = p.beta * p.w
            C_Y += p.amp[:, :, None] * g[:, None, :]
            C_Q += (p.amp * kap[:, None])[:, :, None] * g[:, None, :]
        fY = v[None] * x[None, None, :] * C_Y
        fQ = v[None] * C_Q / self.sites.rho[None, :, None]
        if self.bath_grid is not None:
            fY = fY + self.bath_grid[0]
            fQ = fQ + self.bath_grid[1]
        return fY, fQ


def _merge_ratio(r1, t1, r2, t2):
    z1 = ~np.any(t1 != 0, axis=1)
    z2 = ~np.any(t2 != 0, axis=1)
    same = np.isclose(r1, r2, rtol=1e-12, atol=1e-300)
    if not np.all(z1 | z2 | same):
        raise ValueError("cannot add rows whose exterior tails decay at different rates")
    return np.where(z1, r2, r1)


# --- bath integrals -------------------------------------------------------------

def _site_groups(sites: Sites):
    """Interior sites grouped by identical bath parameters."""
    key = np.stack([sites.rho, sites.gamma, sites.lam], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    return [(uniq[g], np.nonzero(inv.ravel() == g)[0]) for g in range(len(uniq))]


def _t_reduced(w1, w2, c, lam):
    """(w1 + w2) * int v^2 x / ((x - w1^2)(x - w2^2)) for the Debye bath."""
    return -c * 1j * lam / ((w1 + 1j * lam) * (w2 + 1j * lam))


def _pair_factor(p: Pole, q: Pole, c: float, lam: float, pinch_tol: float = 1e-12):
    """(kappa_q - kappa_p) * T(w_p, w_q) split into regular part and delta coefficient.

    Evaluated on the distinct (w, beta) values and scattered back to rows.
    """
    k1, inv1 = np.unique(np.stack([p.w, p.beta]), axis=1, return_inverse=True)
    k2, inv2 = np.unique(np.stack([q.w, q.beta]), axis=1, return_inverse=True)
    reg, delta = _pair_factor_core(k1[0], k1[1], k2[0], k2[1], c, lam, pinch_tol)
    inv1, inv2 = inv1.ravel(), inv2.ravel()
    reg = reg[inv1[:, None], inv2[None, :]]
    delta = delta[inv1[:, None], inv2[None, :]] if np.any(delta) else None
    return reg, delta


def _pair_factor_core(w1, b1, w2, b2, c, lam, pinch_tol):
    w1, w2 = w1[:, None], w2[None, :]
    b1, b2 = b1[:, None], b2[None, :]
    tred = _t_reduced(w1, w2, c, lam)
    s = w1 + w2
    anti = np.abs(b1 + b2) < 1e-14
    real = (np.abs(w1.imag) < 1e-14) & (np.abs(w2.imag) < 1e-14)
    pinch = (~anti) & real & (np.abs(s) <= pinch_tol * (np.abs(w1) + np.abs(w2) + 1))
    num = b2 * w2 - b1 * w1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(anti, b2, num / np.where(pinch, 1.0, s))
    reg = np.where(pinch, 0.0, ratio * tred)
    # 1/(s + i0) = PV - i pi delta(s)
    delta = np.where(pinch, num * (-1j * np.pi) * tred, 0.0)
    return reg, delta


def _bath_params(sites: Sites):
    e = sites.exterior
    return e.rho, e.rho**2 * e.gamma * e.cutoff_lambda, e.cutoff_lambda


# --- the canonical pairing ------------------------------------------------------

def commutator_matrix(O1: OperatorCoefficients, O2: OperatorCoefficients, hbar: float = 1.0):
    """[O1_r, O2_r'] for all row pairs.

    Returns (regular, delta): ``regular`` is the ordinary c-number matrix and
    ``delta`` the coefficient of delta(w - w') arising from coincident real
    bath poles (zero when the operators carry no real poles).
    """
    if O1.n != O2.n or O1.sites.dz != O2.sites.dz:
        raise ValueError("operators live on different grids")
    sites, dz = O1.sites, O1.sites.dz
    b1, b2 = O1.blocks, O2.blocks
    S = dz * (b1["A"] @ b2["Pi"].T - b1["Pi"] @ b2["A"].T
              + b1["X"] @ b2["P"].T - b1["P"] @ b2["X"].T)
    for t1, t2, r1, r2 in ((O1.left, O2.left, O1.rl, O2.rl), (O1.right, O2.right, O1.rr, O2.rr)):
        geo = dz / (1 - r1[:, None] * r2[None, :])
        S = S + geo * (np.outer(t1[:, 0], t2[:, 1]) - np.outer(t1[:, 1], t2[:, 0])
                       + np.outer(t1[:, 2], t2[:, 3]) - np.outer(t1[:, 3], t2[:, 2]))
    reg = np.zeros_like(S)
    dlt = np.zeros_like(S)
    groups = _site_groups(sites)
    rho_e, c_e, lam_e = _bath_params(sites)
    for p in O1.poles:
        for q in O2.poles:
            for (rho, gam, lam), idx in groups:
                c = rho**2 * gam * lam
                if c == 0:
                    continue
                M = (p.amp[:, idx] @ q.amp[:, idx].T) / rho
                fr, fd = _pair_factor(p, q, c, lam)
                reg += M * fr
                if fd is not None:
                    dlt += M * fd
            if c_e != 0 and (np.any(p.left) or np.any(p.right)) and \
                    (np.any(q.left) or np.any(q.right)):
                fr, fd = _pair_factor(p, q, c_e, lam_e)
                for a1, a2, r1, r2 in ((p.left, q.left, O1.rl, O2.rl),
                                       (p.right, q.right, O1.rr, O2.rr)):
                    M = np.outer(a1, a2) / (1 - r1[:, None] * r2[None, :]) / rho_e
                    reg += M * fr
                    if fd is not None:
                        dlt += M * fd
    if O1.bath_grid is not None and O2.bath_grid is not None:
        w = O1.bath_weights
        Y1, Q1 = O1.bath_grid
        Y2, Q2 = O2.bath_grid
        reg += np.einsum("rsk,tsk,k->rt", Y1, Q2, w) - np.einsum("rsk,tsk,k->rt", Q1, Y2, w)
    elif O1.bath_grid is not None or O2.bath_grid is not None:
        if (O1.bath_grid is not None and O2.poles) or (O2.bath_grid is not None and O1.poles):
            raise NotImplementedError("sampled and closed-form bath parts cannot be paired")
    S = S + dz * reg
    return 1j * hbar * S, 1j * hbar * dz * dlt


def commutator(O1: OperatorCoefficients, O2: OperatorCoefficients, hbar: float = 1.0) -> complex:
    """[O1, O2] for single-row operators (regular part)."""
    if O1.R != 1 or O2.R != 1:
        raise ValueError("commutator expects single operators; use commutator_matrix")
    return complex(commutator_matrix(O1, O2, hbar)[0][0, 0])


# --- source terms of the Laplace-domain wave equations ------------------------------

def _laplacian_rows(sites: Sites, scale: np.ndarray):
    """Rows of scale_i * (Delta_d)_{i s} / dz, with the out-of-slab neighbour as a tail."""
    n, dz = sites.n, sites.dz
    M = np.zeros((n, n), complex)
    i = np.arange(n)
    M[i, i] = -2 / dz**2
    M[i[:-1], i[:-1] + 1] = 1 / dz**2
    M[i[1:], i[1:] - 1] = 1 / dz**2
    M = M * scale[:, None] / dz
    lt = np.zeros(n, complex)
    rt = np.zeros(n, complex)
    lt[0] = scale[0] / dz**3
    rt[-1] = scale[-1] / dz**3
    return M, lt, rt


def _source_term(sites: Sites, p: complex, backward: bool) -> OperatorCoefficients:
    p = complex(p)
    if p.real < 0 or p == 0:
        raise DomainError("source terms need Re p > 0 or the boundary value p = -+i omega")
    n, dz = sites.n, sites.dz
    sg = -1.0 if backward else 1.0
    w_of_p = 1j * p                        # chi(p) = chi(omega = i p)
    chi = chi_sites(sites, w_of_p)[0]
    coa = chi_over_alpha_sites(sites, w_of_p)[0]
    out = OperatorCoefficients.zeros(sites, n)
    lap, lt, rt = _laplacian_rows(sites, np.full(n, 1 / p))
    eye = np.eye(n) / dz
    out.blocks["A"] = lap - p * np.diag(chi) / dz
    out.left[:, 0] = lt
    out.right[:, 0] = rt
    out.blocks["Pi"] = sg * eye.astype(complex)
    # alpha [1 - (rho/alpha^2) p^2 chi] written without dividing by alpha
    out.blocks["X"] = sg * np.diag(sites.alpha - sites.rho * p**2 * coa) / dz
    out.blocks["P"] = -p * np.diag(coa) / dz
    # -(p chi/alpha) v / (p^2 + x) [x Y -+ (p/rho) Q]: pole w = i p, kappa = -+p
    amp = -p * np.diag(coa) / dz
    w = np.full(n, 1j * p)
    beta = np.full(n, 1j if not backward else -1j, complex)
    out.poles = [Pole(w, beta, amp.astype(complex), np.zeros(n, complex), np.zeros(n, complex))]
    out.omega = np.full(n, w_of_p)
    return out


def source_term_forward(sites: Sites, p: complex) -> OperatorCoefficients:
    """Rows J_bar(z_i, p) of the forward-transformed wave equation (rows = sites)."""
    return _source_term(sites, p, backward=False)


def source_term_backward(sites: Sites, p: complex) -> OperatorCoefficients:
    """Rows J_breve(z_i, p) of the backward-transformed wave equation."""
    return _source_term(sites, p, backward=True)


def source_commutator_targets(sites: Sites, p: complex, p2: complex):
    """Closed forms of [Jbar(p), Jbar(p2)^+] and [Jbar(p), Jbreve(p2)^+] as matrices.

    1D transverse reduction: (grad grad - I Laplacian) delta -> -Delta_d / dz.
    """
    n, dz = sites.n, sites.dz
    lap, _, _ = _laplacian_rows(sites, np.ones(n))
    q = np.conj(p2)
    chi_p = chi_sites(sites, 1j * p)[0]
    chi_q = chi_sites(sites, 1j * q)[0]
    loc = np.diag(chi_p - chi_q) / dz
    ff = 1j * (p - q) / (p * q) * (-lap) - 1j * p * q / (p + q) * loc
    if abs(p - q) < 1e-14 * abs(p):
        raise DomainError("the mixed commutator target needs p != conj(p2)")
    fb = 1j * (p + q) / (p * q) * (-lap) - 1j * p * q / (p - q) * loc
    return ff, fb


# --- the noise-current density ----------------------------------------------------

def _ext_coa(sites: Sites, omega):
    e = sites.exterior
    chi = chi_exterior(sites, omega)
    return chi * e.alpha / e.coupling_sq if e.alpha > 0 else np.zeros_like(chi)


def build_noise_current(sites: Sites, omega, G: LatticeGreen | None = None) -> OperatorCoefficients:
    """Rows J(z_i, omega_k), ordered frequency-major (row = k * n + i).

    Scalar 1D form of the explicit coefficient expansion: the Green function
    enters conjugated, delta terms become delta_is / dz.
    """
    w = np.atleast_1d(np.asarray(omega, float))
    if np.any(w <= 0):
        raise DomainError("noise current needs omega > 0")
    G = lattice_green(sites, w) if G is None else G
    n, dz, K = sites.n, sites.dz, len(w)
    e = sites.exterior
    chi = chi_sites(sites, w)                               # (K, n)
    chii = chi.imag
    coa = chi_over_alpha_sites(sites, w)
    coa_c = np.conj(coa)
    coa_e = np.conj(_ext_coa(sites, w))                     # conj(chi/alpha) outside
    Gc = np.conj(G.G)                                       # (K, n, n)
    lamc = np.conj(G.lam)
    W = w[:, None, None]
    ci = chii[:, :, None]
    eye = np.eye(n)[None] / dz
    A = -(1 / np.pi) * W**3 * ci * Gc
    Pi = -(1j / np.pi) * W**2 * ci * Gc
    X = ((1j / np.pi) * W**2 * (sites.rho * coa.imag)[:, :, None] * eye
         - (1j / np.pi) * W**2 * ci * sites.alpha[None, None, :] * Gc
         - (1j / np.pi) * W**4 * ci * (sites.rho[None, :] * coa_c)[:, None, :] * Gc)
    P = (-(1 / np.pi) * W * coa.imag[:, :, None] * eye
         + (1 / np.pi) * W**3 * ci * coa_c[:, None, :] * Gc)
    a_amp = (1j / (2 * np.pi)) * W * coa[:, :, None] * eye
    b_amp = (-(1j / (2 * np.pi)) * W * coa_c[:, :, None] * eye
             + (1 / np.pi) * W**3 * ci * coa_c[:, None, :] * Gc)

    def ext_row(Gcol):
        g = Gcol * lamc[:, None]                              # value at the first exterior site
        ww = w[:, None]
        t = np.stack([-(1 / np.pi) * ww**3 * chii * g,
                      -(1j / np.pi) * ww**2 * chii * g,
                      -(1j / np.pi) * ww**2 * chii * e.alpha * g
                      - (1j / np.pi) * ww**4 * chii * e.rho * coa_e[:, None] * g,
                      (1 / np.pi) * ww**3 * chii * coa_e[:, None] * g], axis=-1)
        bt = (1 / np.pi) * ww**3 * chii * coa_e[:, None] * g
        return t.reshape(K * n, 4), bt.reshape(K * n)

    lt, lb = ext_row(Gc[:, :, 0])
    rt, rb = ext_row(Gc[:, :, n - 1])
    R = K * n
    flat = {k: v.reshape(R, n) for k, v in zip(BLOCKS, (A, Pi, X, P))}
    wr = np.repeat(w, n).astype(complex)
    ratio = np.repeat(lamc, n)
    z0 = np.zeros(R, complex)
    poles = [Pole(wr, np.full(R, 1j), a_amp.reshape(R, n), z0, z0),
             Pole(-wr, np.full(R, -1j), b_amp.reshape(R, n), lb, rb)]
    return OperatorCoefficients(sites, flat, lt, rt, ratio, ratio.copy(), poles, wr.real.copy())


def long_time_noise_current(sites: Sites, omega) -> OperatorCoefficients:
    """Rows J_l(z_i, omega_k): the bath-only combination -(chi/2 alpha) v [w^2 Y + (i w/rho) Q]."""
    w = np.atleast_1d(np.asarray(omega, float))
    n, dz, K = sites.n, sites.dz, len(w)
    R = K * n
    coa = chi_over_alpha_sites(sites, w)
    amp = ((1j / (2 * np.pi)) * w[:, None, None] * coa[:, :, None]
           * np.eye(n)[None] / dz).reshape(R, n)
    out = OperatorCoefficients.zeros(sites, R)
    wr = np.repeat(w, n).astype(complex)
    z0 = np.zeros(R, complex)
    out.poles = [Pole(wr, np.full(R, 1j), amp, z0, z0), Pole(-wr, np.full(R, -1j), -amp, z0, z0)]
    out.omega = wr.real.copy()
    out.rl = np.repeat(np.conj(lattice_green(sites, w).lam), n)
    out.rr = out.rl.copy()
    return out


def _padded_green(sites: Sites, w: float, pad: int):
    sp = sites.padded(pad)
    return sp, lattice_green(sp, np.array([w]))


def assemble_noise_current(sites: Sites, omega: float, pad: int = 3) -> OperatorCoefficients:
    """Rows J(z_i, omega) assembled from the two source terms plus the Green-function
    correction proportional to Im chi (independent of ``build_noise_current``)."""
    w = float(omega)
    n, dz = sites.n, sites.dz
    fwd = source_term_forward(sites, -1j * w)
    bwd = source_term_backward(sites, 1j * w)
    base = (fwd + bwd).scaled(np.full(n, 1 / (2 * np.pi)))
    # correction: (i w^2 chi_i / pi) sum_z' dz G*(z, z') Jbreve(z'), over all z'
    sp, Gp = _padded_green(sites, w, pad)
    N = sp.n
    Gc = np.conj(Gp.G[0])
    bwd_p = source_term_backward(sp, 1j * w)
    pref = (1j * w**2 / np.pi) * chi_sites(sites, w)[0].imag
    rows = pad + np.arange(n)
    L = np.stack([dz * Gc[rows] @ bwd_p.blocks[k] for k in BLOCKS], axis=1)
    L = L * pref[:, None, None]
    amp = (dz * Gc[rows] @ bwd_p.poles[0].amp) * pref[:, None]
    corr = OperatorCoefficients.zeros(sites, n)
    inner = slice(pad, pad + n)
    for b, k in enumerate(BLOCKS):
        corr.blocks[k] = L[:, b, inner]
    corr.left = L[:, :, pad - 1].copy()
    corr.right = L[:, :, pad + n].copy()
    lamc = np.conj(Gp.lam[0])
    corr.rl = np.full(n, lamc)
    corr.rr = np.full(n, lamc)
    # the columns one step further out must continue geometrically
    chk_l = np.max(np.abs(L[:, :, pad - 2] - corr.left * lamc))
    chk_r = np.max(np.abs(L[:, :, pad + n + 1] - corr.right * lamc))
    scale = np.max(np.abs(L)) or 1.0
    if max(chk_l, chk_r) > 1e-9 * scale:
        raise ArithmeticError("exterior columns of the correction term are not geometric")
    corr.poles = [Pole(np.full(n, -w + 0j), np.full(n, -1j), amp[:, inner],
                       amp[:, pad - 1].copy(), amp[:, pad + n].copy())]
    out = base + corr
    out.omega = np.full(n, w)
    return out


def dual_construction_residual(J1: OperatorCoefficients, J2: OperatorCoefficients) -> float:
    """Largest coefficient difference between two constructions, relative to the largest coefficient."""
    diffs, scale = [], 0.0
    for k in BLOCKS:
        diffs.append(np.abs(J1.blocks[k] - J2.blocks[k]).max())
        scale = max(scale, np.abs(J1.blocks[k]).max())
    diffs.append(np.abs(J1.left - J2.left).max())
    diffs.append(np.abs(J1.right - J2.right).max())
    live_l = np.any(J1.left != 0, axis=1) | np.any(J2.left != 0, axis=1)
    if live_l.any():
        diffs.append(np.abs(J1.rl - J2.rl)[live_l].max())
    P1, P2 = J1.combined_poles(), J2.combined_poles()
    for p in P1:
        match = [q for q in P2 if np.allclose(q.w, p.w) and np.allclose(q.beta, p.beta)]
        other = match[0] if match else Pole(p.w, p.beta, 0 * p.amp, 0 * p.left, 0 * p.right)
        diffs.append(np.abs(p.amp - other.amp).max())
        diffs.append(np.abs(p.left - other.left).max())
        diffs.append(np.abs(p.right - other.right).max())
        scale = max(scale, np.abs(p.amp).max())
    for q in P2:
        if not any(np.allclose(q.w, p.w) and np.allclose(q.beta, p.beta) for p in P1):
            diffs.append(np.abs(q.amp).max())
    return float(max(diffs) / scale) if scale else float(max(diffs))


# --- commutator kernels of the noise current ------------------------------------------

@dataclass
class KernelReport:
    """Summary of a (z, omega) x (z', omega') commutator kernel."""
    diag_ratio: np.ndarray          # (K, n): diagonal / expected, for [J, J^+]
    offdiag_max: float              # max |K| / sqrt(d d') off the diagonal, [J, J^+]
    jj_max: float                   # max |[J, J]| / max diagonal scale
    diag_scale: np.ndarray          # (K, n): (1/pi) w^2 chi_i / (dz dw)

    @property
    def diag_residual(self) -> float:
        return float(np.max(np.abs(self.diag_ratio - 1)))


def jj_commutators(sites: Sites, omega, weights, rows: OperatorCoefficients | None = None,
                   batch: int = 8, hbar: float = 1.0) -> KernelReport:
    """Discretised [J(z,w), J(z',w')^+] and [J(z,w), J(z',w')] over the full grid.

    Delta functions become 1[z=z']/dz and 1[w=w']/dw.  On the frequency
    diagonal only the delta coefficient is formed; its principal-value
    companion is finite and is checked through the entries with w != w'.
    """
    w = np.asarray(omega, float)
    wt = np.broadcast_to(np.asarray(weights, float), w.shape)
    n, K = sites.n, len(w)
    J = build_noise_current(sites, w) if rows is None else rows
    Jd = J.conj()
    chii = chi_sites(sites, w).imag
    dscale = (hbar / np.pi) * w[:, None] ** 2 * chii / (sites.dz * wt[:, None])
    dflat = dscale.ravel()
    ratio = np.zeros((K, n))
    off = 0.0
    jj = 0.0
    for k0 in range(0, K, batch):
        ks = np.arange(k0, min(K, k0 + batch))
        ridx = (ks[:, None] * n + np.arange(n)[None, :]).ravel()
        Jb = J.take(ridx)
        reg, dlt = commutator_matrix(Jb, Jd, hbar)
        same = (np.repeat(ks, n)[:, None] == np.repeat(np.arange(K), n)[None, :])
        full = np.where(same, dlt / np.repeat(wt, n)[None, :], reg)
        d = full[np.arange(len(ridx)), ridx]
        ratio[ks] = (d / dflat[ridx]).real.reshape(len(ks), n)
        norm = np.sqrt(np.abs(dflat[ridx])[:, None] * np.abs(dflat)[None, :])
        mask = np.ones(full.shape, bool)
        mask[np.arange(len(ridx)), ridx] = False
        off = max(off, float(np.max(np.abs(full[mask]) / norm[mask])))
        reg2, dlt2 = commutator_matrix(Jb, J, hbar)
        if np.any(dlt2 != 0):
            raise ArithmeticError("[J, J] produced a delta term")
        jj = max(jj, float(np.max(np.abs(reg2))))
    return KernelReport(ratio, off, jj / float(np.max(np.abs(dscale))), dscale)


# --- Heisenberg generator ---------------------------------------------------------------

def _padded_blocks(O: OperatorCoefficients, pad: int) -> dict:
    """Blocks and pole amplitudes on interior plus ``pad`` explicit exterior columns a side."""
    n = np.arange(1, pad + 1)
    gl = O.rl[:, None] ** (n[::-1] - 1)          # farthest column first
    gr = O.rr[:, None] ** (n - 1)
    out = {}
    for b, k in enumerate(BLOCKS):
        out[k] = np.concatenate([O.left[:, b, None] * gl, O.blocks[k], O.right[:, b, None] * gr],
                                axis=1)
    out["poles"] = [np.concatenate([p.left[:, None] * gl, p.amp, p.right[:, None] * gr], axis=1)
                    for p in O.poles]
    return out


def generator_action(O: OperatorCoefficients, pad: int = 4):
    """Coefficients of (i/hbar)[H, O] on padded columns.

    The transpose of the equations of motion acting on coefficient rows:
      f_A' = Delta_d f_Pi - (alpha^2/rho) f_Pi + (alpha/rho) f_X
      f_Pi' = f_A
      f_X' = -rho w~0^2 f_P + (1/rho) int v f_Y
      f_P' = -(alpha/rho) f_Pi + f_X/rho
      f_Y' = -rho x f_Q,   f_Q' = f_Y/rho - (v/rho) f_P
    Returns (dblocks, pole_factors, f_P) where the Y part of pole p is scaled
    by -kappa_p and the Q part is the function (v/rho)[x C - f_P].  Columns at
    the outermost padded site lack a neighbour and are dropped.
    """
    sp = O.sites.padded(pad)
    f = _padded_blocks(O, pad)
    al, rho, dz = sp.alpha, sp.rho, sp.dz
    lam, gam = sp.lam, sp.gamma
    c = rho**2 * gam * lam
    Pi = f["Pi"]
    lap = (Pi[:, :-2] - 2 * Pi[:, 1:-1] + Pi[:, 2:]) / dz**2
    s = slice(1, -1)
    d = {
        "A": lap - (al**2 / rho)[s] * Pi[:, s] + (al / rho)[s] * f["X"][:, s],
        "Pi": f["A"][:, s],
        "X": -(rho * sp.omega_tilde_sq())[s] * f["P"][:, s],
        "P": -(al / rho)[s] * Pi[:, s] + f["X"][:, s] / rho[s],
    }
    for p, amp in zip(O.poles, f["poles"]):
        # int v^2 x / (x - w^2) = c i Lambda / (w + i Lambda)
        d["X"] = d["X"] + amp[:, s] * (c[s] * 1j * lam[s]
                                       / (p.w[:, None] + 1j * lam[s])) / rho[s]
    amps = [a[:, s] for a in f["poles"]]
    return d, amps, f


def eigenoperator_residual_rows(parts, omega, pad: int = 4) -> float:
    """max |(i/hbar)[H, O] + i w O| / max |O| for O = sum of ``parts`` (rows share omega).

    Parts may carry different exterior decay ratios; the generator is applied
    to each and summed.
    """
    parts = parts if isinstance(parts, (list, tuple)) else [parts]
    w = np.broadcast_to(np.asarray(omega, float), (parts[0].R,))
    res = None
    scale = 0.0
    fP = 0.0
    pole_res = 0.0
    resonant = 0.0
    for O in parts:
        d, amps, f = generator_action(O, pad)
        s = slice(1, -1)
        r = {k: d[k] + 1j * w[:, None] * f[k][:, s] for k in BLOCKS}
        res = r if res is None else {k: res[k] + r[k] for k in BLOCKS}
        fP = fP + f["P"][:, s]
        for k in BLOCKS:
            scale = max(scale, float(np.abs(f[k]).max()))
        for p, a in zip(O.poles, amps):
            kap = p.beta * p.w
            # f_Y' + i w f_Y = (i w - kappa) v x C
            pole_res = max(pole_res, float(np.max(np.abs((1j * w - kap)[:, None] * a))))
            on = np.abs(p.w**2 - w**2) <= 1e-12 * w**2
            if not np.all(on):
                pole_res = max(pole_res, float(np.max(np.abs(a[~on]))))
            resonant = resonant + a
            scale = max(scale, float(np.abs(a).max()))
    # f_Q' + i w f_Q = (v/rho)[sum_p amp_p (x - w^2)/(x - w_p^2) - f_P] -> sum amp - f_P
    bath_res = float(np.max(np.abs(resonant - fP)))
    blk = max(float(np.abs(res[k]).max()) for k in BLOCKS)
    if scale == 0:
        return 0.0
    return max(blk, bath_res, pole_res) / scale


def positive_frequency_field(sites: Sites, omega: float, pad: int = 3):
    """E+(z_i, w) = (1/2pi)[-i w G Jbar(-i w) - i w G* Jbreve(i w)] summed over all space.

    Returned as two parts (the G and G* terms), whose exterior tails decay with
    lambda and conj(lambda) respectively.
    """
    w = float(omega)
    n, dz = sites.n, sites.dz
    sp, Gp = _padded_green(sites, w, pad)
    rows = pad + np.arange(n)
    parts = []
    for G, src, ratio, pref in ((Gp.G[0], source_term_forward(sp, -1j * w), Gp.lam[0],
                                 -1j * w / (2 * np.pi)),
                                (np.conj(Gp.G[0]), source_term_backward(sp, 1j * w),
                                 np.conj(Gp.lam[0]), -1j * w / (2 * np.pi))):
        L = pref * np.stack([dz * G[rows] @ src.blocks[k] for k in BLOCKS], axis=1)
        amp = pref * dz * G[rows] @ src.poles[0].amp
        O = OperatorCoefficients.zeros(sites, n)
        inner = slice(pad, pad + n)
        for b, k in enumerate(BLOCKS):
            O.blocks[k] = L[:, b, inner]
        O.left, O.right = L[:, :, pad - 1].copy(), L[:, :, pad + n].copy()
        O.rl = np.full(n, ratio)
        O.rr = np.full(n, ratio)
        scale = np.max(np.abs(L)) or 1.0
        if max(np.max(np.abs(L[:, :, pad - 2] - O.left * ratio)),
               np.max(np.abs(L[:, :, pad + n + 1] - O.right * ratio))) > 1e-9 * scale:
            raise ArithmeticError("exterior columns of E+ are not geometric")
        p = src.poles[0]
        O.poles = [Pole(np.full(n, p.w[0]), np.full(n, p.beta[0]), amp[:, inner],
                        amp[:, pad - 1].copy(), amp[:, pad + n].copy())]
        O.omega = np.full(n, w)
        parts.append(O)
    return parts


# --- rows over all space --------------------------------------------------------------

@dataclass
class RowSet:
    """J (or J_l) rows at a batch of frequencies over all space.

    Rows 0..n-1 are the interior sites, row n (n+1) the first exterior site on
    the left (right).  Farther exterior rows repeat the first one with ratio
    conj(lambda); ``mult`` carries the geometric sum 1/(1 - |lambda|^2) for any
    product of an exterior row with a quantity that decays like lambda.
    """
    omega: np.ndarray
    blocks: np.ndarray        # (K, n+2, 4, n)
    a: np.ndarray             # (K, n+2, n) amplitude of the pole at w + i0
    b: np.ndarray             # (K, n+2, n) amplitude of the pole at -w + i0
    chii: np.ndarray          # (K, n+2)
    mult: np.ndarray          # (K, n+2)
    G: LatticeGreen


def rows_all_space(sites: Sites, omega, long_time: bool = False) -> RowSet:
    w = np.atleast_1d(np.asarray(omega, float))
    K, n = len(w), sites.n
    G = lattice_green(sites, w)
    if np.any(np.abs(G.lam) >= 1 - 1e-14):
        raise DomainError("exterior is lossless at some frequency: rows outside do not decay")
    chii = np.concatenate([chi_sites(sites, w).imag,
                           np.repeat(chi_exterior(sites, w).imag[:, None], 2, axis=1)], axis=1)
    mult = np.ones((K, n + 2))
    mult[:, n:] = (1 / (1 - np.abs(G.lam) ** 2))[:, None]
    blocks = np.zeros((K, n + 2, 4, n), complex)
    a = np.zeros((K, n + 2, n), complex)
    b = np.zeros((K, n + 2, n), complex)
    if long_time:
        J = long_time_noise_current(sites, w)
        a[:, :n] = J.poles[0].amp.reshape(K, n, n)
        b[:, :n] = J.poles[1].amp.reshape(K, n, n)
        return RowSet(w, blocks, a, b, chii, mult, G)
    J = build_noise_current(sites, w, G)
    blocks[:, :n] = np.stack([J.blocks[k].reshape(K, n, n) for k in BLOCKS], axis=2)
    a[:, :n] = J.poles[0].amp.reshape(K, n, n)
    b[:, :n] = J.poles[1].amp.reshape(K, n, n)
    coa_c = np.conj(chi_over_alpha_sites(sites, w))
    Gc = np.conj(G.G)
    lamc = np.conj(G.lam)[:, None]
    ww = w[:, None]
    ci = chii[:, n:n + 1]
    for r, g in ((n, lamc * Gc[:, 0, :]), (n + 1, lamc * Gc[:, n - 1, :])):
        blocks[:, r, 0] = -(1 / np.pi) * ww**3 * ci * g
        blocks[:, r, 1] = -(1j / np.pi) * ww**2 * ci * g
        blocks[:, r, 2] = (-(1j / np.pi) * ww**2 * ci * sites.alpha[None] * g
                           - (1j / np.pi) * ww**4 * ci * sites.rho[None] * coa_c * g)
        blocks[:, r, 3] = (1 / np.pi) * ww**3 * ci * coa_c * g
        b[:, r] = blocks[:, r, 3]
    return RowSet(w, blocks, a, b, chii, mult, G)


def green_rows(G: LatticeGreen) -> np.ndarray:
    """G(z_i, row) for the row layout of RowSet: (K, n, n+2)."""
    n = G.G.shape[1]
    lam = G.lam[:, None]
    return np.concatenate([G.G, (lam * G.G[:, :, 0])[:, :, None],
                           (lam * G.G[:, :, n - 1])[:, :, None]], axis=2)


def contract_rows(sites: Sites, kernel: np.ndarray, rows: RowSet):
    """sum over all rows z' of dz kernel(z, z') J(z'): returns (F, Fa, Fb)."""
    kw = kernel * (sites.dz * rows.mult)[:, None, :]
    F = np.einsum("kzr,krbc->kzbc", kw, rows.blocks)
    Fa = np.einsum("kzr,krc->kzc", kw, rows.a)
    Fb = np.einsum("kzr,krc->kzc", kw, rows.b)
    return F, Fa, Fb


def _check_absorptive(chii: np.ndarray, floor: float = 1e-300):
    if np.any(chii <= floor):
        raise DomainError("Im chi vanishes somewhere: the reconstruction divides by it")


def completeness_provider(sites: Sites, target: str):
    """Kernel of the completeness relation for ``target`` built from J's own coefficients.

    A pairs with the Pi-coefficient (prefactor +i pi), Pi with the A-coefficient
    (-i pi) and X with the P-coefficient (+i pi), each divided by w^2 Im chi at
    the row position.
    """
    col, pref = {"A": (1, 1j * np.pi), "Pi": (0, -1j * np.pi), "X": (3, 1j * np.pi)}[target]

    def provider(w):
        rows = rows_all_space(sites, w)
        _check_absorptive(rows.chii)
        c = rows.blocks[:, :, col, :]
        kern = pref * np.conj(np.swapaxes(c, 1, 2)) / (w[:, None, None] ** 2 * rows.chii[:, None, :])
        return contract_rows(sites, kern, rows)

    return provider


def green_provider(sites: Sites, kind: str, long_time: bool = False):
    """Kernels of the Green-function representations of the fields at time t.

    A: -G;  E: -i w G;  X: (i w chi_z/alpha_z) G - (i/(alpha_z w)) delta / dz.
    """
    if kind == "X" and np.any(sites.alpha <= 0):
        raise DomainError("X reconstruction divides by alpha; every site needs alpha > 0")

    def provider(w):
        rows = rows_all_space(sites, w, long_time)
        Gr = green_rows(rows.G)
        W = w[:, None, None]
        if kind == "A":
            kern = -Gr
        elif kind == "E":
            kern = -1j * W * Gr
        elif kind == "Pi":
            kern = 1j * W * Gr
        elif kind == "X":
            coa = chi_over_alpha_sites(sites, w)
            kern = 1j * W * coa[:, :, None] * Gr
            n = sites.n
            i = np.arange(n)
            kern[:, i, i] += -1j / (sites.alpha[None, :] * w[:, None] * sites.dz)
        else:
            raise ValueError(kind)
        return contract_rows(sites, kern, rows)

    return provider


# --- completeness ------------------------------------------------------------------------

@dataclass
class ReconstructionResult:
    target: str
    blocks: np.ndarray        # (T, 4, n) coefficient rows times dz
    fY: np.ndarray            # (T, n, K) times dz
    fQ: np.ndarray

    @property
    def target_error(self) -> float:
        i = BLOCKS.index(self.target)
        return float(np.max(np.abs(self.blocks[:, i, :] - np.eye(self.blocks.shape[0]))))

    @property
    def leakage(self) -> float:
        """Largest other-block coefficient; the bath blocks are measured by their
        quadrature-weighted row norm so that they are comparable to a site entry."""
        i = BLOCKS.index(self.target)
        other = [np.abs(self.blocks[:, j, :]).max() for j in range(4) if j != i]
        return float(max(other + [self.bath_norm]))

    bath_weights: np.ndarray | None = None

    @property
    def bath_norm(self) -> float:
        w = self.bath_weights
        nY = np.sqrt(np.einsum("tsk,k->ts", np.abs(self.fY) ** 2, w))
        nQ = np.sqrt(np.einsum("tsk,k->ts", np.abs(self.fQ) ** 2, w))
        return float(max(nY.max(), nQ.max()))


def reconstruct_canonical(sites: Sites, rule, target: str) -> ReconstructionResult:
    """Frequency integral of J . c* / (w^2 Im chi) + h.c. for the target field.

    Returned coefficients are multiplied by dz, so a perfect reconstruction of
    the field at z_i has the identity in the target block.
    """
    from .spectral import functional_at
    if target not in ("A", "Pi", "X"):
        raise ValueError(target)
    (blocks, fY, fQ), = functional_at(completeness_provider(sites, target), sites, [0.0], rule)
    dz = sites.dz
    return ReconstructionResult(target, blocks * dz, fY * dz, fQ * dz, rule.bath_weights)


# --- the Hamiltonian as a quadratic form in J -----------------------------------------------

def _gram(sites: Sites, w: np.ndarray):
    """pi sum_z dz conj(f_a) f_b / (w Im chi_z) over all rows, (K, 6n, 6n).

    Columns: the four site blocks, then the amplitudes of the poles at w + i0
    and at -w + i0 per site.
    """
    rows = rows_all_space(sites, w)
    _check_absorptive(rows.chii)
    K, nr = rows.chii.shape
    n = sites.n
    mu = np.pi * sites.dz * rows.mult / (w[:, None] * rows.chii)
    R = np.concatenate([rows.blocks.reshape(K, nr, 4 * n), rows.a, rows.b], axis=2)
    return np.matmul(np.conj(R * mu[:, :, None]).transpose(0, 2, 1), R)


def _xx_tail(sites: Sites, upper: float) -> np.ndarray:
    from scipy import integrate
    out = np.zeros(sites.n)
    cache: dict = {}
    for i in range(sites.n):
        key = tuple(float(a[i]) for a in sites.layer_params())
        if key not in cache:
            def f(w, i=i):
                return w**3 * chi_sites(sites, w)[0, i].imag
            cache[key] = (sites.rho[i] ** 2 / (np.pi * sites.alpha[i] ** 2)
                          * integrate.quad(f, upper, np.inf, epsabs=0, epsrel=1e-10)[0])
        out[i] = cache[key]
    return out


def hamiltonian_target(sites: Sites, nodes: np.ndarray, weights: np.ndarray) -> dict:
    """The lattice Hamiltonian in orthonormal coordinates psi = sqrt(weight) * field.

    Non-bath part (4n, 4n); X-Q coupling (n, K); bath diagonals YY and QQ (n, K).
    """
    n, dz = sites.n, sites.dz
    al, rho = sites.alpha, sites.rho
    h = np.zeros((4 * n, 4 * n))
    i = np.arange(n)
    lap = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / dz**2
    h[:n, :n] = 0.5 * lap + np.diag(al**2 / (2 * rho))
    h[n + i, n + i] = 0.5
    h[2 * n + i, 2 * n + i] = 0.5 * rho * sites.omega_tilde_sq()
    h[3 * n + i, 3 * n + i] = 0.5 / rho
    h[i, 3 * n + i] = h[3 * n + i, i] = al / (2 * rho)
    v = sites.v(nodes)
    return {"nb": h, "XQ": v * np.sqrt(weights)[None, :] / (2 * rho[:, None]),
            "YY": 0.5 * rho[:, None] * nodes[None, :] ** 2,
            "QQ": np.broadcast_to(0.5 / rho[:, None], (n, len(nodes))).copy()}


@dataclass
class HamiltonianReport:
    residual: float                 # relative Frobenius distance, symmetric parts
    block_errors: dict              # name -> (||S - h||_F, ||h||_F)
    pipi_ratio: np.ndarray          # diagonal of the Pi-Pi block over 1/2
    aa_error: float                 # max |S_AA - h_AA| / max |h_AA|
    nb: np.ndarray = field(repr=False)

    def relative(self, name: str) -> float:
        e, t = self.block_errors[name]
        return e / t if t else e


def hamiltonian_diagonal_residual(sites: Sites, rule, chunk: int = 48) -> HamiltonianReport:
    """Quadratic form of pi sum dz int dw J^+ J / (w Im chi) against the lattice Hamiltonian.

    The bath pole products are split by partial fractions; on the bath
    frequency diagonal only the delta coefficient is kept, as for the
    commutator kernel.
    """
    n, dz = sites.n, sites.dz
    wk, wt = rule.bath_nodes, rule.bath_weights
    K = len(wk)
    x = wk**2
    pv = rule.pv
    nb = np.zeros((4 * n, 4 * n), complex)
    acc_S = np.zeros((4 * n, n, K), complex)      # PV of (M_a + M_b), per pole column site
    acc_wS = np.zeros_like(acc_S)
    acc_h = np.zeros((2, 2, n, n, K), complex)     # PV of h_pq
    acc_wh = np.zeros_like(acc_h)
    for a0 in range(0, rule.size, chunk):
        sl = slice(a0, min(rule.size, a0 + chunk))
        w, W = rule.nodes[sl], rule.weights[sl]
        M = _gram(sites, w)
        D = pv.D[:, sl]
        nb += np.tensordot(W, M[:, :4 * n, :4 * n], axes=(0, 0))
        S = M[:, :4 * n, 4 * n:5 * n] + M[:, :4 * n, 5 * n:]
        acc_S += np.tensordot(S, D, axes=(0, 1))
        acc_wS += np.tensordot(w[:, None, None] * S, D, axes=(0, 1))
        h = M[:, 4 * n:, 4 * n:].reshape(len(w), 2, n, 2, n).transpose(1, 3, 0, 2, 4)
        acc_h += np.tensordot(h, D, axes=(2, 1))
        acc_wh += np.tensordot(w[None, None, :, None, None] * h, D, axes=(2, 1))
    # beyond the rule the X-X entry still decays only like 1/w^2: add its
    # leading asymptote (rho^2 / (pi alpha^2)) int w^3 Im chi dw per site
    nb[2 * n:3 * n, 2 * n:3 * n] += np.diag(_xx_tail(sites, rule.upper)) / dz
    Mk = _gram(sites, wk)
    v = sites.v(wk)                                                  # (n, K)
    # non-bath x bath
    Sk = np.moveaxis(Mk[:, :4 * n, 4 * n:5 * n] + Mk[:, :4 * n, 5 * n:], 0, -1)
    Dk = np.moveaxis(Mk[:, :4 * n, 4 * n:5 * n] - Mk[:, :4 * n, 5 * n:], 0, -1)
    pvS = acc_S - Sk * pv.corr
    pvwS = acc_wS - wk * Sk * pv.corr
    KY = v[None] * x * (pvS + 1j * np.pi * Dk / (2 * wk))
    KQ = v[None] / sites.rho[None, :, None] * (1j * pvwS + 1j * np.pi * 1j * wk * Dk / (2 * wk))
    sq = dz * np.sqrt(wt)
    SY = (sq * KY).real
    SQ = (sq * KQ).real
    # bath x bath: Phi_pm[g](x_k) = PV[g] +- i pi g(w_k) / (2 w_k)
    hk = np.moveaxis(Mk[:, 4 * n:, 4 * n:].reshape(K, 2, n, 2, n), 0, -1).transpose(0, 2, 1, 3, 4)
    pv_h = acc_h - hk * pv.corr
    pv_wh = acc_wh - wk * hk * pv.corr
    half = 1j * np.pi / (2 * wk)

    def phi(pvg, gk, sign):
        return pvg + sign * half * gk

    tgt = hamiltonian_target(sites, wk, wt)
    err = {}
    # non-bath block
    Snb = dz * nb.real
    err["nb"] = (np.linalg.norm(Snb - tgt["nb"]), np.linalg.norm(tgt["nb"]))
    XQ = np.zeros((4 * n, n, K))
    XQ[2 * n + np.arange(n), np.arange(n)] = tgt["XQ"]
    err["nb-Y"] = (np.sqrt(2) * np.linalg.norm(SY), 0.0)
    err["nb-Q"] = (np.sqrt(2) * np.linalg.norm(SQ - XQ), np.sqrt(2) * np.linalg.norm(XQ))
    sig = {0: -1, 1: +1}     # conj(pole a) -> -i0 side, conj(pole b) -> +i0
    tau = {0: +1, 1: -1}
    dx = x[None, :] - x[:, None]                                     # x_l - x_k
    off = ~np.eye(K, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_dx = np.where(off, 1 / dx, 0.0)
    e2 = {"YY": 0.0, "YQ": 0.0, "QY": 0.0, "QQ": 0.0}
    t2 = {"YY": 0.0, "QQ": 0.0}
    diag_ratio = {"YY": [], "QQ": []}
    rho = sites.rho
    for s in range(n):
        KB = {k: np.zeros((n, K, K), complex) for k in e2}
        dsum = np.zeros((n, K), complex)
        for p in (0, 1):
            for q in (0, 1):
                g0k, g1k = hk[p, q, s], wk * hk[p, q, s]              # (n, K)
                A0 = phi(pv_h[p, q, s], g0k, sig[p])[:, :, None]      # at x_k
                B0 = phi(pv_h[p, q, s], g0k, tau[q])[:, None, :]      # at x_l
                A1 = phi(pv_wh[p, q, s], g1k, sig[p])[:, :, None]
                B1 = phi(pv_wh[p, q, s], g1k, tau[q])[:, None, :]
                E0 = (A0 - B0) * inv_dx
                E1 = (A1 - B1) * inv_dx
                E2 = (x[:, None] * A0 - x[None, :] * B0) * inv_dx
                KB["YY"] += E0
                KB["YQ"] += 1j * E1
                KB["QY"] += -1j * E1
                KB["QQ"] += E2
                if p == q:
                    dsum += g0k
        vs = v[s][None, :, None]
        vt = v[:, None, :]
        mult = {"YY": vs * x[None, :, None] * vt * x[None, None, :],
                "YQ": vs * x[None, :, None] * vt / rho[:, None, None],
                "QY": vs / rho[s] * vt * x[None, None, :],
                "QQ": vs / rho[s] * vt / rho[:, None, None]}
        wsq = np.sqrt(wt[:, None] * wt[None, :])
        # delta(w_k - w_l) -> 1/w_k; coefficient pi^2 (h_aa + h_bb) / (2 w_k^2)
        dl = np.pi**2 * dsum / (2 * wk**2 * wt)                         # (n, K)
        for name in KB:
            Sb = dz * (wsq[None] * mult[name] * KB[name]).real
            m = {"YY": x**2 * v[s] * v, "YQ": x * v[s] * v / rho[:, None] * 1j * wk,
                 "QY": v[s] / rho[s] * v * x * (-1j * wk),
                 "QQ": v[s] * v / (rho[s] * rho[:, None]) * wk**2}[name]
            diag = dz * wt * (m * dl).real                               # (n, K)
            idx = np.arange(K)
            Sb[:, idx, idx] = diag
            T = np.zeros_like(Sb)
            if name in ("YY", "QQ"):
                T[s, idx, idx] = tgt[name][s]
                t2[name] += float(np.sum(T**2))
                diag_ratio[name].append(diag[s] / tgt[name][s])
            e2[name] += float(np.sum((Sb - T) ** 2))
    for name in e2:
        err[name] = (np.sqrt(e2[name]), np.sqrt(t2.get(name, 0.0)))
    tot_e = np.sqrt(sum(e**2 for e, _ in err.values()))
    tot_t = np.sqrt(sum(t**2 for _, t in err.values()))
    pipi = np.diag(Snb[n:2 * n, n:2 * n]) / 0.5
    hA = tgt["nb"][:n, :n]
    aa = float(np.max(np.abs(Snb[:n, :n] - hA)) / np.max(np.abs(hA)))
    rep = HamiltonianReport(float(tot_e / tot_t), err, pipi, aa, Snb)
    rep.block_errors["YY-diag"] = (float(np.max(np.abs(np.array(diag_ratio["YY"]) - 1))), 1.0)
    rep.block_errors["QQ-diag"] = (float(np.max(np.abs(np.array(diag_ratio["QQ"]) - 1))), 1.0)
    return rep


# --- the generator on a finite lattice with a discrete bath ---------------------------

def generator_matrix(sites: Sites, nodes: np.ndarray, weights: np.ndarray):
    """Heisenberg generator acting on coefficient rows of a finite lattice.

    The lattice is closed by walls (the field vanishes one site beyond either
    end) and the bath is the discrete set of ``nodes`` with ``weights``; the
    static shift of the oscillators uses the discrete sum, so the bath
    reproduces the static susceptibility exactly.  Row layout:
    [f_A, f_Pi, f_X, f_P, f_Y (n, K), f_Q (n, K)] with f_Y flattened site-major.
    Returns a sparse matrix M with d f / dt = M f, the same rules as
    ``generator_action``.
    """
    from scipy import sparse
    n, dz = sites.n, sites.dz
    K = len(nodes)
    al, rho = sites.alpha, sites.rho
    v = sites.v(nodes)                                                # (n, K)
    wt = np.asarray(weights, float)
    wsq = sites.omega0**2 + (v**2 * wt[None, :]).sum(axis=1) / rho**2
    x = np.asarray(nodes, float) ** 2
    N = n * (4 + 2 * K)
    iA, iPi, iX, iP = (np.arange(n) + b * n for b in range(4))
    iY = 4 * n + np.arange(n * K).reshape(n, K)
    iQ = 4 * n + n * K + np.arange(n * K).reshape(n, K)
    r, c, d = [], [], []

    def put(rows, cols, vals):
        rows, cols = np.broadcast_arrays(rows, cols)
        r.append(rows.ravel())
        c.append(cols.ravel())
        d.append(np.broadcast_to(vals, rows.shape).ravel())

    # f_A' = Delta_d f_Pi - (alpha^2/rho) f_Pi + (alpha/rho) f_X
    put(iA, iPi, -2 / dz**2 - al**2 / rho)
    put(iA[:-1], iPi[1:], 1 / dz**2)
    put(iA[1:], iPi[:-1], 1 / dz**2)
    put(iA, iX, al / rho)
    put(iPi, iA, 1.0)
    # f_X' = -rho w~^2 f_P + (1/rho) sum_k w_k v_k f_Y,k
    put(iX, iP, -rho * wsq)
    put(iX[:, None], iY, wt[None, :] * v / rho[:, None])
    put(iP, iPi, -al / rho)
    put(iP, iX, 1 / rho)
    # f_Y' = -rho x f_Q,   f_Q' = f_Y / rho - (v / rho) f_P
    put(iY, iQ, -rho[:, None] * x[None, :])
    put(iQ, iY, 1 / rho[:, None] * np.ones((1, K)))
    put(iQ, iP[:, None], -v / rho[:, None])
    M = sparse.coo_matrix((np.concatenate(d), (np.concatenate(r), np.concatenate(c))),
                          shape=(N, N))
    return M.tocsr()
