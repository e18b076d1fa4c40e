"""Direct integration of the canonical equations of motion on a finite lattice.

The lattice is the slab plus explicit exterior sites closed by walls, far
enough out that nothing reflected from a wall reaches the slab before the end
of the run.  Every site carries a discrete bath on the nodes of the spectral
grid with couplings v(w_k) sqrt(w_k).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .medium import ConfigError, Sites
from .spectral import ClassicalData

TAYLOR_ORDER = 12


@dataclass
class ClassicalState:
    """Real canonical fields on N sites; Y and Q are (N, K) over the bath nodes."""
    A: np.ndarray
    Pi: np.ndarray
    X: np.ndarray
    P: np.ndarray
    Y: np.ndarray
    Q: np.ndarray

    @classmethod
    def zeros(cls, N: int, K: int) -> "ClassicalState":
        z = np.zeros(N)
        return cls(z, z.copy(), z.copy(), z.copy(), np.zeros((N, K)), np.zeros((N, K)))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.A, self.Pi, self.X, self.P, self.Y.ravel(), self.Q.ravel()])

    @classmethod
    def from_vector(cls, y: np.ndarray, N: int, K: int) -> "ClassicalState":
        a = [y[i * N:(i + 1) * N] for i in range(4)]
        Y = y[4 * N:4 * N + N * K].reshape(N, K)
        Q = y[4 * N + N * K:].reshape(N, K)
        return cls(*a, Y, Q)


class OracleSystem:
    """Linear system y' = L y for the lattice ``sites`` (already padded) and a discrete bath."""

    def __init__(self, sites: Sites, nodes, weights):
        self.sites = sites
        self.nodes = np.asarray(nodes, float)
        self.weights = np.asarray(weights, float)
        self.N, self.K = sites.n, len(self.nodes)
        self.size = self.N * (4 + 2 * self.K)
        self.L = self._assemble()
        self.metric = self._metric()

    @property
    def coupling(self) -> np.ndarray:
        """v_k sqrt(w_k) per site, the coupling of the discrete bath modes."""
        return self.sites.v(self.nodes) * np.sqrt(self.weights)[None, :]

    def omega_tilde_sq(self) -> np.ndarray:
        s = self.sites
        return s.omega0**2 + (self.coupling**2).sum(axis=1) / s.rho**2

    def _index(self):
        N, K = self.N, self.K
        blk = [np.arange(N) + b * N for b in range(4)]
        Y = 4 * N + np.arange(N * K).reshape(N, K)
        return (*blk, Y, Y + N * K)

    def _assemble(self):
        s, N, K = self.sites, self.N, self.K
        al, rho, dz = s.alpha, s.rho, s.dz
        v = s.v(self.nodes)
        x = self.nodes**2
        iA, iPi, iX, iP, iY, iQ = self._index()
        M = sparse.lil_matrix((self.size, self.size))
        lap = sparse.diags([np.full(N - 1, 1.0), np.full(N, -2.0), np.full(N - 1, 1.0)],
                           [-1, 0, 1]) / dz**2
        M[np.ix_(iA, iPi)] = sparse.eye(N)
        M[np.ix_(iPi, iA)] = lap - sparse.diags(al**2 / rho)
        M[np.ix_(iPi, iP)] = sparse.diags(-al / rho)
        M[np.ix_(iX, iP)] = sparse.diags(1 / rho)
        M[np.ix_(iX, iA)] = sparse.diags(al / rho)
        M[np.ix_(iP, iX)] = sparse.diags(-rho * self.omega_tilde_sq())
        M = M.tocoo()
        # bath couplings, written out as triplets
        r = [M.row]
        c = [M.col]
        d = [M.data]
        for rows, cols, vals in (
                (np.repeat(iP, K), iQ.ravel(), (-self.weights[None, :] * v / rho[:, None]).ravel()),
                (iY.ravel(), iQ.ravel(), np.repeat(1 / rho, K)),
                (iY.ravel(), np.repeat(iX, K), (v / rho[:, None]).ravel()),
                (iQ.ravel(), iY.ravel(), (-rho[:, None] * x[None, :]).ravel())):
            r.append(rows)
            c.append(cols)
            d.append(vals)
        return sparse.csr_matrix((np.concatenate(d), (np.concatenate(r), np.concatenate(c))),
                                 shape=(self.size, self.size))

    def _metric(self) -> np.ndarray:
        """Pairing weights: dz per site field, dz w_k per bath node."""
        dz, N = self.sites.dz, self.N
        bath = dz * np.tile(self.weights, N)
        return np.concatenate([np.full(4 * N, dz), bath, bath])

    def coefficient_generator(self):
        """W^-1 L^T W: the induced motion of coefficient rows of linear functionals."""
        W = sparse.diags(self.metric)
        Wi = sparse.diags(1 / self.metric)
        return (Wi @ self.L.T @ W).tocsr()

    def energy(self, y: np.ndarray) -> float:
        """The lattice Hamiltonian (discrete bath, walls beyond the last site)."""
        st = ClassicalState.from_vector(y, self.N, self.K)
        s, dz = self.sites, self.sites.dz
        rho, al = s.rho, s.alpha
        grad = np.diff(np.concatenate([[0.0], st.A, [0.0]])) / dz
        vw = self.sites.v(self.nodes) * self.weights[None, :]
        x = self.nodes**2
        e = (0.5 * np.sum(st.Pi**2) + 0.5 * np.sum(grad**2)
             + np.sum((st.P + al * st.A) ** 2 / (2 * rho))
             + np.sum(0.5 * rho * self.omega_tilde_sq() * st.X**2)
             + np.sum(st.X * (vw * st.Q).sum(axis=1) / rho)
             + np.sum(self.weights[None, :] * (st.Q**2 / (2 * rho[:, None])
                                               + 0.5 * rho[:, None] * x[None, :] * st.Y**2)))
        return float(dz * e)


def check_step(dt: float, omega_max: float, dz: float) -> None:
    limit = 0.1 * min(2 * np.pi / omega_max, dz)
    if dt > limit * (1 + 1e-12):
        raise ConfigError(f"time step {dt:g} exceeds the resolution limit {limit:g} "
                          "(0.1 min(2 pi/omega_max, dz))")


@dataclass
class History:
    times: np.ndarray
    states: np.ndarray                 # (nt, size)
    system: OracleSystem
    dt: float
    scheme: str = f"Taylor-{TAYLOR_ORDER} fixed step"

    def field(self, kind: str, sites: slice | None = None) -> np.ndarray:
        """A, E = -Pi or X at every sample, (nt, N) or restricted to ``sites``."""
        N = self.system.N
        b = {"A": 0, "E": 1, "X": 2}[kind]
        f = self.states[:, b * N:(b + 1) * N]
        f = -f if kind == "E" else f
        return f if sites is None else f[:, sites]

    def energy_drift(self) -> float:
        e = np.array([self.system.energy(y) for y in self.states])
        return float(np.max(np.abs(e - e[0])) / abs(e[0])) if e[0] else 0.0


def taylor_step(L, y: np.ndarray, dt: float, order: int = TAYLOR_ORDER) -> np.ndarray:
    out = y.copy()
    term = y
    for m in range(1, order + 1):
        term = (dt / m) * (L @ term)
        out += term
    return out


def integrate_eom(system: OracleSystem, initial: ClassicalState, t_max: float, dt: float,
                  n_samples: int, omega_max: float | None = None) -> History:
    """Fixed-step Taylor integration; samples at n_samples equally spaced times in [0, t_max]."""
    omega_max = system.nodes.max() if omega_max is None else omega_max
    check_step(dt, omega_max, system.sites.dz)
    intervals = max(1, n_samples - 1)
    per = int(np.ceil(t_max / intervals / dt))
    h = t_max / intervals / per
    y = initial.vector().astype(float)
    out = [y.copy()]
    for _ in range(intervals):
        for _ in range(per):
            y = taylor_step(system.L, y, h)
        out.append(y.copy())
    return History(np.linspace(0.0, t_max, intervals + 1), np.array(out), system, h)


# --- initial data and comparison --------------------------------------------------------

def random_initial(cols: Sites, nodes, rng: np.random.Generator, bath_scale: float = 1.0,
                   n_modes: int = 6) -> ClassicalData:
    """Random lattice fields and bath data smooth in frequency on ``cols``.

    Bath data are random combinations of a few smooth functions of w with a
    Gaussian envelope, so that the discrete bath samples a continuum profile.
    """
    nodes = np.asarray(nodes, float)
    C = cols.n
    top = nodes.max()
    env = np.exp(-(nodes / (0.25 * top)) ** 2)
    basis = np.array([np.cos(m * np.pi * nodes / top) for m in range(n_modes)]) * env
    fields = rng.standard_normal((4, C))
    Y = bath_scale * rng.standard_normal((C, n_modes)) @ basis
    Q = bath_scale * rng.standard_normal((C, n_modes)) @ basis
    return ClassicalData(*fields, Y, Q)


def embed(data: ClassicalData, N: int, offset: int) -> ClassicalState:
    """Place data given on C columns into an N-site lattice starting at ``offset``."""
    C, K = data.Y.shape
    st = ClassicalState.zeros(N, K)
    sl = slice(offset, offset + C)
    for name in ("A", "Pi", "X", "P", "Y", "Q"):
        getattr(st, name)[sl] = getattr(data, name)
    return st


def compare_reconstruction(history: History, trajectories, interior: slice) -> dict:
    """Relative L2 error over (t, z) per field kind.

    ``trajectories`` are contracted FieldTrajectory objects sampled at the
    history's times; ``interior`` selects their sites in the oracle lattice.
    """
    out = {}
    for tr in trajectories:
        if tr.values is None or tr.values.shape[0] != len(history.times) or \
                not np.allclose(tr.times, history.times):
            raise ValueError("trajectory and history are sampled differently")
        ref = history.field(tr.field_kind, interior)
        if ref.shape != tr.values.shape:
            raise ValueError("trajectory and history live on different grids")
        out[tr.field_kind] = _rel(tr.values, ref)
    return out


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb else float(np.linalg.norm(a))
