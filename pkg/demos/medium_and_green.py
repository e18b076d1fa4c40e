# %% [markdown]
# # A Lorentz slab: susceptibility and Green function
#
# Load the reference slab, look at chi(omega), and check a few properties of
# the Green function on the lattice used by the rest of the package.

# %%
from pathlib import Path

import numpy as np

from polarizon import greenfn as gf
from polarizon import susceptibility as sus
from polarizon.medium import discretize, load_config

cfg = load_config(Path(__file__).parent.parent / "configs" / "lorentz_slab.json")
slab = cfg.profile.layers[0]
print(cfg.grid.summary())

# %% [markdown]
# The bath cutoff makes chi a rational function; Im chi > 0 everywhere on the
# real axis and the resonance sits near omega0 with width ~ gamma.

# %%
w = np.array([0.25, 0.5, 1.0, 2.0, 5.0, 20.0])
for wi, c in zip(w, sus.chi_omega(slab, w)):
    print(f"omega={wi:5.2f}  chi={c.real:+.4f}{c.imag:+.4f}i")

# %%
print("zeros of the denominator in Re p > 0:", sus.denominator_zero_scan(slab))

# %% [markdown]
# Lattice Green function: the ratio recursion agrees with a dense solve, and
# the w G sum rule gives -i pi / dz on the diagonal.

# %%
sites = discretize(cfg.profile, cfg.grid)
ws = np.array([0.5, 1.0, 3.0])
fast, dense = gf.lattice_green(sites, ws).G, gf.lattice_green_dense(sites, ws).G
print("recursion vs dense:", np.abs(fast - dense).max())

r = gf.sum_rule(sites, "wG", cfg.grid.omega_max)
print("diagonal:", np.diag(r.value)[:3], "target:", np.diag(r.target)[0])
print("relative residual:", r.diagonal_residual())

# %% [markdown]
# Generalized optical theorem on the continuum Green function, two
# frequencies at once.

# %%
print(gf.optical_theorem_residual(cfg.profile, 0.8, 1.4, cfg.grid))
