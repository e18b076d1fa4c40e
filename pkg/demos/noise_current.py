# %% [markdown]
# # The noise current as a set of linear functionals
#
# Every operator here is a row of coefficients over the initial canonical
# fields; commutators are c-numbers from the canonical pairing.

# %%
from pathlib import Path

import numpy as np

from polarizon import noisecurrent as nc
from polarizon.medium import discretize, load_config
from polarizon.spectral import spectral_rule

cfg = load_config(Path(__file__).parent.parent / "configs" / "lorentz_slab.json").quick_version()
grid = cfg.grid
sites = discretize(cfg.profile, grid)

# %% [markdown]
# J(z, w) built directly and assembled from the two source terms agree.

# %%
w = grid.omega_nodes[4]
J = nc.build_noise_current(sites, [w])
print("dual construction:", nc.dual_construction_residual(J, nc.assemble_noise_current(sites, w)))
print("eigenoperator residual:", nc.eigenoperator_residual_rows(J, w))

# %% [markdown]
# Commutator kernel over the whole (z, omega) grid. The diagonal over its
# expected value should be 1, everything else should vanish.

# %%
rep = nc.jj_commutators(sites, grid.omega_nodes, grid.omega_weights)
print("diag ratio range:", rep.diag_ratio.min(), rep.diag_ratio.max())
print("off-diagonal:", rep.offdiag_max, " [J, J]:", rep.jj_max)

# %% [markdown]
# Completeness: integrating J against the right weights returns the
# canonical fields, and the Hamiltonian is diagonal in J.

# %%
rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights)
for target in ("A", "Pi", "X"):
    r = nc.reconstruct_canonical(sites, rule, target)
    print(target, "target error", r.target_error, "leakage", r.leakage)

h = nc.hamiltonian_diagonal_residual(sites, rule)
print("Hamiltonian residual:", h.residual)
