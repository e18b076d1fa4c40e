"""Layered medium description, bath coupling law and the spectral grid.

Natural units throughout (hbar = eps0 = mu0 = c = 1).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

GAMMA_MIN_DEFAULT = 1e-4


class ConfigError(ValueError):
    """Raised for malformed or physically invalid configuration input."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class Layer:
    z_start: float
    z_end: float
    alpha: float
    rho: float
    omega0: float
    gamma: float
    cutoff_lambda: float

    @property
    def coupling_sq(self) -> float:
        """alpha^2 / rho, the oscillator strength entering chi."""
        return self.alpha**2 / self.rho

    def validate(self, gamma_min: float = GAMMA_MIN_DEFAULT, where: str = "layer") -> None:
        if not self.rho > 0:
            raise ConfigError(f"{where}.rho must be > 0 (got {self.rho})")
        if not self.omega0 > 0:
            raise ConfigError(f"{where}.omega0 must be > 0 (got {self.omega0})")
        if not self.alpha >= 0:
            raise ConfigError(f"{where}.alpha must be >= 0 (got {self.alpha})")
        if not self.gamma >= gamma_min:
            raise ConfigError(
                f"{where}.gamma must be >= gamma_min={gamma_min} (got {self.gamma}); "
                "the medium has to be absorptive everywhere")
        if not self.cutoff_lambda > 0:
            raise ConfigError(f"{where}.lambda must be > 0 (got {self.cutoff_lambda})")
        if self.cutoff_lambda < 5 * self.omega0:
            warnings.warn(f"{where}: bath cutoff lambda={self.cutoff_lambda} is not well above "
                          f"omega0={self.omega0}", stacklevel=3)


@dataclass(frozen=True)
class MediumProfile:
    layers: tuple[Layer, ...]
    exterior: Layer
    gamma_min: float = GAMMA_MIN_DEFAULT

    @property
    def domain_length(self) -> float:
        return self.layers[-1].z_end

    def validate(self, check_absorption: bool = True) -> None:
        if not self.layers:
            raise ConfigError("layers: at least one layer is required")
        z = 0.0
        for i, lay in enumerate(self.layers):
            if abs(lay.z_start - z) > 1e-12 * max(1.0, abs(z)):
                raise ConfigError(f"layers[{i}].z_start={lay.z_start} does not continue the "
                                  f"previous layer (expected {z})")
            if not lay.z_end > lay.z_start:
                raise ConfigError(f"layers[{i}].z_end must exceed z_start")
            z = lay.z_end
        gmin = self.gamma_min if check_absorption else -math.inf
        for i, lay in enumerate(self.layers):
            lay.validate(gmin, where=f"layers[{i}]")
        self.exterior.validate(gmin, where="exterior")


def sample_at(profile: MediumProfile, z: float) -> Layer:
    """Layer containing z; intervals are [start, end) except the last, which is closed."""
    L = profile.domain_length
    if z < 0 or z > L:
        raise DomainError(f"z={z} outside the domain [0, {L}]")
    for lay in profile.layers:
        if lay.z_start <= z < lay.z_end:
            return lay
    return profile.layers[-1]


def coupling_v(layer: Layer, omega):
    """Debye-cutoff bath coupling v_omega = rho*sqrt((2/pi) gamma Lambda^2/(omega^2+Lambda^2))."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("coupling_v needs omega >= 0")
    lam = layer.cutoff_lambda
    out = layer.rho * np.sqrt((2.0 / np.pi) * layer.gamma * lam**2 / (omega**2 + lam**2))
    return out if out.ndim else float(out)


def bath_weight_integral(layer: Layer) -> float:
    """Closed form of int_0^inf v_omega^2 d omega."""
    return layer.rho**2 * layer.gamma * layer.cutoff_lambda


def bath_weight_tail(layer: Layer, omega_max: float) -> float:
    """int_{omega_max}^inf v^2 d omega."""
    lam = layer.cutoff_lambda
    return bath_weight_integral(layer) * (1.0 - (2.0 / np.pi) * np.arctan(omega_max / lam))


def renormalized_frequency_sq(layer: Layer) -> float:
    return layer.omega0**2 + bath_weight_integral(layer) / layer.rho**2


@dataclass(frozen=True)
class SpectralGrid:
    """Joint (z, omega) discretization.

    z nodes are cell centres z_i = (i + 1/2) dz on [0, L]; omega nodes are
    midpoints of Nomega equal panels on [0, omega_max].
    """
    Nz: int
    dz: float
    Nomega: int
    omega_max: float
    omega_nodes: np.ndarray = field(repr=False)
    omega_weights: np.ndarray = field(repr=False)
    pole_rule: str = "pv_plus_delta"

    @classmethod
    def uniform(cls, Nz: int, length: float, Nomega: int, omega_max: float) -> "SpectralGrid":
        if Nz < 2 or Nomega < 4:
            raise ConfigError("grid: need Nz >= 2 and Nomega >= 4")
        if not omega_max > 0:
            raise ConfigError("grid.omega_max must be > 0")
        h = omega_max / Nomega
        nodes = (np.arange(Nomega) + 0.5) * h
        weights = np.full(Nomega, h)
        return cls(Nz, length / Nz, Nomega, float(omega_max), nodes, weights)

    @property
    def domega(self) -> float:
        return self.omega_max / self.Nomega

    @property
    def z_nodes(self) -> np.ndarray:
        return (np.arange(self.Nz) + 0.5) * self.dz

    def nearest_node(self, omega: float) -> int:
        return int(np.argmin(np.abs(self.omega_nodes - omega)))

    def with_sizes(self, Nz: int | None = None, Nomega: int | None = None,
                   omega_max: float | None = None) -> "SpectralGrid":
        L = self.dz * self.Nz
        return SpectralGrid.uniform(Nz or self.Nz, L, Nomega or self.Nomega,
                                    omega_max or self.omega_max)

    def summary(self) -> dict:
        return {"Nz": self.Nz, "Nomega": self.Nomega, "omega_max": self.omega_max, "dz": self.dz}


@dataclass(frozen=True)
class Sites:
    """Per-site parameter arrays of the lattice (interior) plus the exterior layer."""
    dz: float
    alpha: np.ndarray
    rho: np.ndarray
    omega0: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    exterior: Layer
    layer_index: np.ndarray

    @property
    def n(self) -> int:
        return len(self.alpha)

    def layer_params(self) -> tuple:
        return self.alpha, self.rho, self.omega0, self.gamma, self.lam

    def ext_params(self) -> tuple:
        e = self.exterior
        return e.alpha, e.rho, e.omega0, e.gamma, e.cutoff_lambda

    def padded(self, pad: int) -> "Sites":
        """Interior sites flanked by `pad` explicit exterior sites on each side."""
        e = self.exterior

        def ext(a, val):
            return np.concatenate([np.full(pad, val), a, np.full(pad, val)])

        return Sites(self.dz, ext(self.alpha, e.alpha), ext(self.rho, e.rho),
                     ext(self.omega0, e.omega0), ext(self.gamma, e.gamma),
                     ext(self.lam, e.cutoff_lambda), e,
                     np.concatenate([np.full(pad, -1), self.layer_index, np.full(pad, -1)]))

    def v(self, omega):
        """Coupling v_s(omega) as an array of shape (n, len(omega))."""
        omega = np.atleast_1d(np.asarray(omega, float))
        return self.rho[:, None] * np.sqrt((2 / np.pi) * self.gamma[:, None] * self.lam[:, None]**2
                                           / (omega[None, :]**2 + self.lam[:, None]**2))

    def v_ext(self, omega):
        return np.asarray(coupling_v(self.exterior, np.asarray(omega, float)))

    def omega_tilde_sq(self) -> np.ndarray:
        return self.omega0**2 + self.gamma * self.lam


def discretize(profile: MediumProfile, grid: SpectralGrid) -> Sites:
    z = grid.z_nodes
    layers = [sample_at(profile, zi) for zi in z]
    idx = np.array([profile.layers.index(lay) for lay in layers])

    def arr(name):
        return np.array([getattr(lay, name) for lay in layers], dtype=float)

    return Sites(grid.dz, arr("alpha"), arr("rho"), arr("omega0"), arr("gamma"),
                 arr("cutoff_lambda"), profile.exterior, idx)


# --- configuration ---------------------------------------------------------

_LAYER_KEYS = ("alpha", "rho", "omega0", "gamma", "lambda")


def _layer_from_dict(d: Any, where: str, z_start=0.0, z_end=0.0) -> Layer:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    missing = [k for k in _LAYER_KEYS if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")
    try:
        vals = {k: float(d[k]) for k in _LAYER_KEYS}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: non-numeric parameter ({exc})") from None
    return Layer(float(d.get("z_start", z_start)), float(d.get("z_end", z_end)), vals["alpha"],
                 vals["rho"], vals["omega0"], vals["gamma"], vals["lambda"])


@dataclass(frozen=True)
class Config:
    profile: MediumProfile
    grid: SpectralGrid
    quick: dict
    raw: dict

    def quick_version(self) -> "Config":
        q = self.quick
        grid = self.grid.with_sizes(Nz=int(q.get("Nz", 16)), Nomega=int(q.get("Nomega", 64)))
        return replace(self, grid=grid)

    @property
    def tolerance_scale(self) -> float:
        return float(self.quick.get("tolerance_scale", 1.0))


def config_from_dict(cfg: dict, check_absorption: bool = True) -> Config:
    if not isinstance(cfg, dict):
        raise ConfigError("configuration root must be an object")
    for key in ("layers", "exterior", "grid"):
        if key not in cfg:
            raise ConfigError(f"missing top-level key '{key}'")
    if not isinstance(cfg["layers"], list):
        raise ConfigError("layers: expected an array")
    layers = []
    for i, d in enumerate(cfg["layers"]):
        for k in ("z_start", "z_end"):
            if not isinstance(d, dict) or k not in d:
                raise ConfigError(f"layers[{i}]: missing key {k}")
        layers.append(_layer_from_dict(d, f"layers[{i}]"))
    exterior = _layer_from_dict(cfg["exterior"], "exterior")
    units = cfg.get("units", {"system": "natural"})
    if isinstance(units, dict) and units.get("system", "natural") != "natural":
        raise ConfigError("units.system: only 'natural' is supported internally")
    gamma_min = float(cfg.get("gamma_min", GAMMA_MIN_DEFAULT))
    profile = MediumProfile(tuple(layers), exterior, gamma_min)
    profile.validate(check_absorption)
    g = cfg["grid"]
    for k in ("Nz", "Nomega", "omega_max"):
        if k not in g:
            raise ConfigError(f"grid: missing key {k}")
    grid = SpectralGrid.uniform(int(g["Nz"]), profile.domain_length, int(g["Nomega"]),
                                float(g["omega_max"]))
    quick = dict(cfg.get("quick", {}))
    quick.setdefault("Nz", 16)
    quick.setdefault("Nomega", 64)
    quick.setdefault("tolerance_scale", 10.0)
    return Config(profile, grid, quick, cfg)


def load_config(path: str | Path, check_absorption: bool = True) -> Config:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(cfg, check_absorption)


def slab_profile(layers: Sequence[dict], exterior: dict, gamma_min: float = GAMMA_MIN_DEFAULT,
                 check: bool = True) -> MediumProfile:
    """Profile from short dicts with a 'width' key instead of z_start/z_end."""
    out, z = [], 0.0
    for i, d in enumerate(layers):
        w = float(d["width"])
        out.append(_layer_from_dict(d, f"layers[{i}]", z, z + w))
        z += w
    prof = MediumProfile(tuple(out), _layer_from_dict(exterior, "exterior"), gamma_min)
    if check:
        prof.validate()
    return prof
