"""Green functions of the 1D transverse wave operator d^2/dz^2 + omega^2 eps(z, omega).

Two representations live here.

* ``GreenFunction1D``: the continuum two-solution form u_-(z<) u_+(z>)/W with
  per-layer exponentials and outgoing exterior solutions.
* ``LatticeGreen``: the inverse of the cell-centred second-difference operator
  on an infinite lattice whose exterior sites carry the exterior medium.  The
  exterior is eliminated exactly through the decaying ratio lambda, so the
  lattice radiates.  This is the object the quantum-operator algebra is built
  on, because every canonical degree of freedom sits on a lattice site.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .quadrature import adaptive_quad_batched
from .medium import DomainError, MediumProfile, Sites, SpectralGrid, discretize, sample_at
from .susceptibility import denominator_laplace


# --- local permittivities -----------------------------------------------------

def chi_sites(sites: Sites, omega) -> np.ndarray:
    """chi at every site, shape (n_omega, n_sites); omega may be complex (upper half plane)."""
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    a = sites.alpha**2 / sites.rho
    D = denominator_laplace(sites.omega0[None, :], sites.gamma[None, :], sites.lam[None, :],
                            -1j * w[:, None])
    return a[None, :] / D


def chi_over_alpha_sites(sites: Sites, omega) -> np.ndarray:
    """chi/alpha = (alpha/rho)/D, finite when alpha = 0."""
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    D = denominator_laplace(sites.omega0[None, :], sites.gamma[None, :], sites.lam[None, :],
                            -1j * w[:, None])
    return (sites.alpha / sites.rho)[None, :] / D


def chi_exterior(sites: Sites, omega) -> np.ndarray:
    e = sites.exterior
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    return e.coupling_sq / denominator_laplace(e.omega0, e.gamma, e.cutoff_lambda, -1j * w)


def exterior_ratio(dz: float, omega, eps_ext) -> np.ndarray:
    """Decaying root of lam^2 - 2 c lam + 1 = 0, c = 1 - dz^2 omega^2 eps/2.

    For a lossless exterior on the real axis both roots can be unimodular; the
    outgoing one (Im lam > 0) is taken then.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    c = 1 - 0.5 * dz**2 * w**2 * np.asarray(eps_ext)
    r = np.sqrt(c * c - 1 + 0j)
    l1, l2 = c - r, c + r
    pick = np.abs(l1) < np.abs(l2)
    lam = np.where(pick, l1, l2)
    tie = np.abs(np.abs(l1) - np.abs(l2)) < 1e-12
    lam = np.where(tie, np.where(l1.imag > 0, l1, l2), lam)
    return lam


# --- lattice Green function ---------------------------------------------------

@dataclass
class LatticeGreen:
    """G[k, i, j] = G(z_i, z_j, omega_k) on the interior sites.

    Outside the slab G(i, N-1+n) = G(i, N-1) lam^n and G(i, -n) = G(i, 0) lam^n.
    """
    omega: np.ndarray
    G: np.ndarray
    lam: np.ndarray
    sites: Sites = field(repr=False)

    @property
    def dz(self) -> float:
        return self.sites.dz

    def conj(self) -> "LatticeGreen":
        return LatticeGreen(self.omega, np.conj(self.G), np.conj(self.lam), self.sites)


def lattice_operator(sites: Sites, omega) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal operator M = Delta_d + omega^2 eps with radiating boundary rows."""
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    n, dz = sites.n, sites.dz
    eps = 1 + chi_sites(sites, w)
    lam = exterior_ratio(dz, w, 1 + chi_exterior(sites, w))
    M = np.zeros((len(w), n, n), dtype=complex)
    idx = np.arange(n)
    M[:, idx, idx] = -2 / dz**2 + w[:, None] ** 2 * eps
    M[:, idx[:-1], idx[1:]] = 1 / dz**2
    M[:, idx[1:], idx[:-1]] = 1 / dz**2
    M[:, 0, 0] += lam / dz**2
    M[:, -1, -1] += lam / dz**2
    return M, lam


def lattice_green_dense(sites: Sites, omega) -> LatticeGreen:
    """Oracle: batched dense solve of M G = I/dz."""
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    M, lam = lattice_operator(sites, w)
    eye = np.broadcast_to(np.eye(sites.n) / sites.dz, M.shape)
    return LatticeGreen(w, np.linalg.solve(M, eye), lam, sites)


def lattice_green(sites: Sites, omega) -> LatticeGreen:
    """Two-sided ratio recursion for the tridiagonal inverse, vectorised over omega."""
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    n, dz = sites.n, sites.dz
    eps = 1 + chi_sites(sites, w)
    lam = exterior_ratio(dz, w, 1 + chi_exterior(sites, w))
    t = dz**2 * w[:, None] ** 2 * eps - 2
    s = np.empty_like(t)
    q = np.empty_like(t)
    s[:, 0] = lam
    for i in range(n - 1):
        s[:, i + 1] = 1 / (-t[:, i] - s[:, i])
    q[:, n - 1] = lam
    for i in range(n - 1, 0, -1):
        q[:, i - 1] = 1 / (-t[:, i] - q[:, i])
    d = 1 / (t + s + q)
    Tinv = np.zeros((len(w), n, n), dtype=complex)
    idx = np.arange(n)
    Tinv[:, idx, idx] = d
    for m in range(1, n):
        i = idx[: n - m]
        Tinv[:, i, i + m] = Tinv[:, i, i + m - 1] * q[:, i + m - 1]
        Tinv[:, i + m, i] = Tinv[:, i, i + m]
    return LatticeGreen(w, dz * Tinv, lam, sites)


# --- continuum two-solution Green function ----------------------------------

def _wavenumber(omega: float, eps: complex) -> complex:
    k = omega * np.sqrt(complex(eps))
    return k if k.imag >= 0 else -k


@dataclass
class GreenFunction1D:
    """Continuum G(z, z') at one real frequency.

    u_minus / u_plus hold the left- and right-outgoing solutions and their
    derivatives at ``z_nodes``; the layer coefficient tables allow evaluation
    anywhere, including the exterior.
    """
    omega: float
    profile: MediumProfile
    z_nodes: np.ndarray
    bounds: np.ndarray          # layer start points plus L
    k: np.ndarray               # wavenumber per layer, index 0 and -1 are exteriors
    eps: np.ndarray
    coef_minus: np.ndarray      # (n_layers + 2, 2): A, B of u_- per region
    coef_plus: np.ndarray
    wronskian: complex
    u_minus: np.ndarray = field(repr=False, default=None)
    u_plus: np.ndarray = field(repr=False, default=None)

    # region r = 0 is z < 0, r = 1..n are the layers, r = n + 1 is z >= L
    def _region(self, z):
        z = np.asarray(z, dtype=float)
        r = np.searchsorted(self.bounds, z, side="right")
        return np.where(z >= self.bounds[-1], len(self.bounds), r)

    def _ref(self, r):
        refs = np.concatenate([[0.0], self.bounds[:-1], [self.bounds[-1]]])
        return refs[r]

    def solution(self, which: str, z, derivative: bool = False):
        coef = self.coef_minus if which == "minus" else self.coef_plus
        r = self._region(z)
        k = self.k[r]
        x = np.asarray(z, dtype=float) - self._ref(r)
        ep, em = np.exp(1j * k * x), np.exp(-1j * k * x)
        A, B = coef[r, 0], coef[r, 1]
        if derivative:
            return 1j * k * (A * ep - B * em)
        return A * ep + B * em

    def eval(self, z, zp):
        z, zp = np.broadcast_arrays(np.asarray(z, float), np.asarray(zp, float))
        lo, hi = np.minimum(z, zp), np.maximum(z, zp)
        return self.solution("minus", lo) * self.solution("plus", hi) / self.wronskian

    def matrix(self, z=None) -> np.ndarray:
        z = self.z_nodes if z is None else np.asarray(z, float)
        um, up = self.solution("minus", z), self.solution("plus", z)
        lo = np.minimum.outer(np.arange(len(z)), np.arange(len(z)))
        hi = np.maximum.outer(np.arange(len(z)), np.arange(len(z)))
        return um[lo] * up[hi] / self.wronskian

    def wronskian_at(self, z) -> np.ndarray:
        um, up = self.solution("minus", z), self.solution("plus", z)
        dum, dup = self.solution("minus", z, True), self.solution("plus", z, True)
        return um * dup - dum * up

    def derivative_jump(self, zp) -> np.ndarray:
        """d/dz G(z, z') from z'+ minus z'-; equals 1 for a unit delta source."""
        return self.wronskian_at(zp) / self.wronskian

    def segments(self, zs: float, conjugate: bool = False):
        """G(zs, .) as piecewise sums of exponentials on [0, L].

        Returns a list of (a, b, zref, terms) with terms [(c, kappa), ...] so that
        G(zs, x) = sum c exp(i kappa (x - zref)) for x in [a, b].
        """
        cuts = sorted(set(self.bounds.tolist()) | {float(zs)})
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 0:
                continue
            mid = 0.5 * (a + b)
            r = int(self._region(mid))
            k, zref = self.k[r], float(self._ref(r))
            if mid < zs:
                A, B = self.coef_minus[r] * self.solution("plus", zs) / self.wronskian
            else:
                A, B = self.coef_plus[r] * self.solution("minus", zs) / self.wronskian
            terms = [(A, k), (B, -k)]
            if conjugate:
                terms = [(np.conj(c), -np.conj(kk)) for c, kk in terms]
            out.append((a, b, zref, terms))
        return out


def _layer_eps(layer, omega) -> complex:
    D = denominator_laplace(layer.omega0, layer.gamma, layer.cutoff_lambda, -1j * omega)
    return complex(1 + layer.coupling_sq / D)


def build_green(profile: MediumProfile, omega: float, grid: SpectralGrid | None = None,
                z_nodes=None) -> GreenFunction1D:
    """Continuum Green function with outgoing conditions in the exterior."""
    if not omega > 0:
        raise DomainError("build_green needs omega > 0")
    layers = profile.layers
    bounds = np.array([lay.z_start for lay in layers] + [profile.domain_length])
    eps = np.array([_layer_eps(profile.exterior, omega)]
                   + [_layer_eps(lay, omega) for lay in layers]
                   + [_layer_eps(profile.exterior, omega)])
    k = np.array([_wavenumber(omega, e) for e in eps])
    nreg = len(eps)
    refs = np.concatenate([[0.0], bounds[:-1], [bounds[-1]]])
    cm = np.zeros((nreg, 2), dtype=complex)
    cp = np.zeros((nreg, 2), dtype=complex)
    cm[0] = (0, 1)
    for r in range(1, nreg):
        zb = refs[r]
        d = zb - refs[r - 1]
        A, B = cm[r - 1]
        u = A * np.exp(1j * k[r - 1] * d) + B * np.exp(-1j * k[r - 1] * d)
        du = 1j * k[r - 1] * (A * np.exp(1j * k[r - 1] * d) - B * np.exp(-1j * k[r - 1] * d))
        cm[r] = ((u + du / (1j * k[r])) / 2, (u - du / (1j * k[r])) / 2)
    if not np.all(np.isfinite(cm)):
        raise FloatingPointError(f"left solution overflowed at omega={omega}; layers too lossy/thick")
    cp[-1] = (1, 0)
    for r in range(nreg - 2, -1, -1):
        zb = refs[r + 1]
        A, B = cp[r + 1]
        u, du = A + B, 1j * k[r + 1] * (A - B)
        d = zb - refs[r]
        cp[r] = ((u + du / (1j * k[r])) / 2 * np.exp(-1j * k[r] * d),
                 (u - du / (1j * k[r])) / 2 * np.exp(1j * k[r] * d))
    if not np.all(np.isfinite(cp)):
        raise FloatingPointError(f"right solution overflowed at omega={omega}; layers too lossy/thick")
    if z_nodes is None:
        z_nodes = grid.z_nodes if grid is not None else np.linspace(0, profile.domain_length, 65)
    g = GreenFunction1D(float(omega), profile, np.asarray(z_nodes, float), bounds, k, eps, cm, cp,
                        0j)
    g.wronskian = complex(g.wronskian_at(np.array([0.0]))[0])
    g.u_minus = g.solution("minus", g.z_nodes)
    g.u_plus = g.solution("plus", g.z_nodes)
    return g


def wronskian_variation(G: GreenFunction1D) -> float:
    W = G.wronskian_at(G.z_nodes)
    return float(np.max(np.abs(W - G.wronskian)) / abs(G.wronskian))


def reciprocity_residual(G, sample_pairs=None) -> float:
    """max |G(z,z') - G(z',z)| / max |G| over the sample (or the full matrix)."""
    if isinstance(G, GreenFunction1D):
        if sample_pairs is None:
            M = G.matrix()
            return float(np.max(np.abs(M - M.T)) / np.max(np.abs(M)))
        z, zp = np.asarray(sample_pairs, float).T
        a, b = G.eval(z, zp), G.eval(zp, z)
        return float(np.max(np.abs(a - b)) / np.max(np.abs(np.concatenate([a, b]))))
    M = np.asarray(G)
    return float(np.max(np.abs(M - np.swapaxes(M, -1, -2))) / np.max(np.abs(M)))


def defining_residual(G: GreenFunction1D, profile: MediumProfile, omega: float | None = None,
                      adjoint: bool = False) -> float:
    """Apply the discrete operator to sampled G; max |dz (L G) - I|.

    Nodes are taken from G.z_nodes, which must be uniformly spaced cell
    centres; the neighbours outside [0, L] are sampled from the exterior
    solution.  adjoint=True differentiates in the second argument.
    """
    omega = G.omega if omega is None else omega
    z = G.z_nodes
    dz = z[1] - z[0]
    ze = np.concatenate([[z[0] - dz], z, [z[-1] + dz]])
    Gx = G.eval(ze[:, None], z[None, :])
    if adjoint:
        Gx = G.eval(z[None, :], ze[:, None])
    eps = np.array([_layer_eps(sample_at(profile, zi), omega) for zi in z])
    lap = (Gx[2:] - 2 * Gx[1:-1] + Gx[:-2]) / dz**2
    R = dz * (lap + omega**2 * eps[:, None] * Gx[1:-1]) - np.eye(len(z))
    return float(np.max(np.abs(R)))


# --- optical theorem -----------------------------------------------------------

def _int_exp(kappa: complex, a: float, b: float, zref: float) -> complex:
    """int_a^b exp(i kappa (x - zref)) dx."""
    d = b - a
    x = 1j * kappa * d
    if abs(x) < 1e-3:
        core = d * (1 + x / 2 + x * x / 6 + x**3 / 24 + x**4 / 120)
    else:
        core = (np.exp(x) - 1) / (1j * kappa)
    return np.exp(1j * kappa * (a - zref)) * core


def _product_integral(seg1, seg2, deriv: bool) -> complex:
    cuts = sorted({s[0] for s in seg1} | {s[1] for s in seg1} | {s[0] for s in seg2}
                  | {s[1] for s in seg2})
    tot = 0j
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        s1 = next(s for s in seg1 if s[0] <= mid <= s[1])
        s2 = next(s for s in seg2 if s[0] <= mid <= s[1])
        zref = s1[2]
        for c1, k1 in s1[3]:
            for c2, k2 in s2[3]:
                c = c1 * c2
                if deriv:
                    c = c * (1j * k1) * (1j * k2)
                tot += c * _int_exp(k1 + k2, a, b, zref)
    return tot


def _chi_segments(profile: MediumProfile, seg1, seg2, omega, omega2):
    """Same as _product_integral but weighted by chi*(omega) - chi(omega2) per layer."""
    cuts = sorted({s[0] for s in seg1} | {s[1] for s in seg1} | {s[0] for s in seg2}
                  | {s[1] for s in seg2})
    tot = 0j
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        lay = sample_at(profile, mid)
        w = np.conj(_layer_eps(lay, omega) - 1) - (_layer_eps(lay, omega2) - 1)
        if w == 0:
            continue
        s1 = next(s for s in seg1 if s[0] <= mid <= s[1])
        s2 = next(s for s in seg2 if s[0] <= mid <= s[1])
        for c1, k1 in s1[3]:
            for c2, k2 in s2[3]:
                tot += w * c1 * c2 * _int_exp(k1 + k2, a, b, s1[2])
    return tot


def _seg_value(segs, x, deriv=False):
    for a, b, zref, terms in segs:
        if a <= x <= b:
            v = 0j
            for c, k in terms:
                v += c * (1j * k if deriv else 1) * np.exp(1j * k * (x - zref))
            return v
    raise ValueError(x)


def optical_theorem_sides(profile: MediumProfile, omega: float, omega2: float, z: float,
                          zp: float, G1: GreenFunction1D | None = None,
                          G2: GreenFunction1D | None = None) -> tuple[complex, complex]:
    """Both sides of the two-frequency optical theorem restricted to [0, L].

    Left: int_0^L [chi*(omega) - chi(omega2)] G*(z,x,omega) G(x,z',omega2) dx.
    Right: the single-G combination, with the boundary terms that integration
    by parts leaves at x = 0 and x = L.
    """
    G1 = G1 or build_green(profile, omega)
    G2 = G2 or build_green(profile, omega2)
    s1 = G1.segments(z, conjugate=True)
    s2 = G2.segments(zp)
    L = profile.domain_length
    lhs = _chi_segments(profile, s1, s2, omega, omega2)
    dd = _product_integral(s1, s2, deriv=True)

    g1 = lambda x: _seg_value(s1, x)
    g2 = lambda x: _seg_value(s2, x)
    dg1 = lambda x: _seg_value(s1, x, True)
    dg2 = lambda x: _seg_value(s2, x, True)
    b21 = g2(L) * dg1(L) - g2(0.0) * dg1(0.0)
    b12 = g1(L) * dg2(L) - g1(0.0) * dg2(0.0)
    w1, w2 = omega**2, omega2**2
    G1zz = np.conj(G1.eval(z, zp))
    G2zz = G2.eval(z, zp)
    rhs = -(w1 * G1zz - w2 * G2zz + (w1 - w2) * dd + w2 * b21 - w1 * b12) / (w1 * w2)
    return complex(lhs), complex(rhs)


def optical_theorem_residual(profile: MediumProfile, omega: float, omega2: float,
                             grid: SpectralGrid | None = None, sample_pairs=None) -> float:
    """max |lhs - rhs| over sampled pairs, relative to max |lhs| (absolute if that vanishes)."""
    if sample_pairs is None:
        zn = grid.z_nodes if grid is not None else np.linspace(0, profile.domain_length, 9)[1:-1]
        pick = zn[:: max(1, len(zn) // 6)]
        sample_pairs = [(a, b) for a in pick for b in pick]
    G1 = build_green(profile, omega)
    G2 = build_green(profile, omega2)
    diffs, scale = [], 0.0
    for z, zp in sample_pairs:
        lhs, rhs = optical_theorem_sides(profile, omega, omega2, z, zp, G1, G2)
        diffs.append(abs(lhs - rhs))
        scale = max(scale, abs(lhs))
    d = max(diffs)
    return float(d / scale) if scale > 1e-300 else float(d)


# --- frequency sum rules --------------------------------------------------------

SUM_RULES = ("wG", "w3Gchi", "w3G", "w3chiGchi", "w5chiGchi")


def _laplacian_matrix(n: int, dz: float) -> np.ndarray:
    D = (-2 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)) / dz**2
    return D


def sum_rule_target(sites: Sites, rule: str) -> np.ndarray:
    n, dz = sites.n, sites.dz
    a = sites.alpha**2 / sites.rho
    eye = np.eye(n)
    if rule == "wG":
        return -1j * np.pi * eye / dz
    if rule == "w3Gchi":
        return 1j * np.pi * np.diag(a) / dz
    if rule == "w3G":
        return -1j * np.pi * (-_laplacian_matrix(n, dz) + np.diag(a)) / dz
    if rule == "w3chiGchi":
        return np.zeros((n, n), dtype=complex)
    if rule == "w5chiGchi":
        return -1j * np.pi * np.diag(a**2) / dz
    raise ValueError(rule)


def _integrand(sites: Sites, rule: str, w: np.ndarray) -> np.ndarray:
    """Im of the omega > 0 integrand for a batch of omegas, shape (m, n, n).

    The full-line integral is 2i times the integral of this over omega > 0.
    """
    w = np.asarray(w, float)
    G = lattice_green(sites, w).G
    W = w[:, None, None]
    if rule == "wG":
        f = W * G
    elif rule == "w3Gchi":
        f = W**3 * G * chi_sites(sites, w)[:, None, :]
    elif rule == "w3G":
        f = W**3 * G - W * np.eye(sites.n)[None] / sites.dz
    else:
        chi = chi_sites(sites, w)
        p = 3 if rule == "w3chiGchi" else 5
        f = W**p * chi[:, :, None] * G * chi[:, None, :]
    return f.imag


def _tail(sites: Sites, rule: str, omega_max: float) -> np.ndarray:
    """Beyond omega_max the lattice Green function is I/(dz omega^2 eps) to leading order."""
    n, dz = sites.n, sites.dz

    def diag_f(w):
        chi = chi_sites(sites, w)[0]
        g = 1 / (dz * w**2 * (1 + chi))
        if rule == "wG":
            f = w * g
        elif rule == "w3Gchi":
            f = w**3 * g * chi
        elif rule == "w3G":
            f = w**3 * (g - 1 / (dz * w**2))
        elif rule == "w3chiGchi":
            f = w**3 * chi * g * chi
        else:
            f = w**5 * chi * g * chi
        return f.imag

    val = integrate.quad_vec(diag_f, omega_max, np.inf, epsabs=1e-14, epsrel=1e-10)[0]
    return np.diag(val)


def sum_rule_matrix(sites: Sites, rule: str, omega_max: float, tail: bool = True,
                    epsrel: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Full-line integral over all site pairs and its L1 scale (for relative measures)."""
    edge = 2 / sites.dz
    pts = [float(x) for x in [edge, 1.01 * edge, *sites.omega0, *sites.lam] if 0 < x < omega_max]
    val, l1, _ = adaptive_quad_batched(lambda w: _integrand(sites, rule, w), 0.0, omega_max,
                                       points=pts, epsrel=epsrel)
    if tail:
        val = val + _tail(sites, rule, omega_max)
    return 2j * val, 2 * l1


@dataclass
class SumRuleResult:
    rule: str
    value: np.ndarray
    target: np.ndarray
    scale: np.ndarray
    omega_max: float

    def diagonal_residual(self) -> float:
        d, t = np.diag(self.value), np.diag(self.target)
        if np.all(t == 0):
            return float(np.max(np.abs(d) / np.diag(self.scale)))
        return float(np.max(np.abs(d - t) / np.abs(t)))

    def offdiagonal_residual(self) -> float:
        """Largest deviation outside the target's stencil, relative to the diagonal scale."""
        n = self.value.shape[0]
        i, j = np.indices((n, n))
        band = 1 if self.rule == "w3G" else 0
        mask = np.abs(i - j) > band
        if not mask.any():
            return 0.0
        diag_scale = np.max(np.abs(np.diag(self.target))) or np.max(np.diag(self.scale))
        return float(np.max(np.abs(self.value - self.target)[mask]) / diag_scale)

    def stencil_residual(self) -> float:
        """For the w^3 G rule, the nearest-neighbour entries against the stencil target."""
        n = self.value.shape[0]
        i, j = np.indices((n, n))
        mask = np.abs(i - j) == 1
        t = self.target[mask]
        return float(np.max(np.abs(self.value[mask] - t) / np.abs(t)))


def sum_rule(sites: Sites, rule: str, omega_max: float, tail: bool = True) -> SumRuleResult:
    val, scale = sum_rule_matrix(sites, rule, omega_max, tail)
    return SumRuleResult(rule, val, sum_rule_target(sites, rule), scale, omega_max)


def _rule_at(profile, grid, z, z2, rule):
    sites = discretize(profile, grid)
    res = sum_rule(sites, rule, grid.omega_max)
    i = int(np.clip(np.floor(z / grid.dz), 0, grid.Nz - 1))
    j = int(np.clip(np.floor(z2 / grid.dz), 0, grid.Nz - 1))
    return complex(res.value[i, j])


def sum_rule_at(profile, grid, z, z2, rule: str) -> complex:
    """One entry of a frequency sum rule at the nodes nearest to z and z2."""
    return _rule_at(profile, grid, z, z2, rule)


def sum_rule_convergence(sites: Sites, rule: str, omega_maxes) -> list[tuple[float, float]]:
    """(omega_max, diagonal residual) rows for a convergence table."""
    rows = []
    for om in omega_maxes:
        rows.append((float(om), sum_rule(sites, rule, float(om)).diagonal_residual()))
    return rows


def analyticity_probe(sites: Sites, radii, thetas=(0.25, 0.5, 0.75)) -> np.ndarray:
    """|dz omega^2 G_ii| along rays omega = R exp(i pi theta); tends to 1 for large R."""
    out = np.empty((len(radii), len(thetas)))
    for a, R in enumerate(radii):
        for b, th in enumerate(thetas):
            w = R * np.exp(1j * np.pi * th)
            G = lattice_green(sites, w).G[0]
            out[a, b] = np.max(np.abs(sites.dz * w**2 * np.diag(G)))
    return out
