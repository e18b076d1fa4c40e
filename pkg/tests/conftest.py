import json
from pathlib import Path

import pytest

from polarizon.medium import SpectralGrid, config_from_dict, discretize, slab_profile

ROOT = Path(__file__).resolve().parents[1]
REFERENCE = ROOT / "configs" / "lorentz_slab.json"

EXTERIOR = dict(alpha=0.5, rho=1.0, omega0=1.0, gamma=0.5, **{"lambda": 20.0})
LAYER_A = dict(width=2.0, alpha=1.0, rho=1.0, omega0=1.0, gamma=0.3, **{"lambda": 20.0})
LAYER_B = dict(width=2.0, alpha=2.0, rho=1.5, omega0=2.0, gamma=0.5, **{"lambda": 30.0})


def two_layer(Nz=16, Nomega=64, omega_max=20.0):
    """Two contrasting layers of width 2 in a weakly coupled exterior."""
    prof = slab_profile([LAYER_A, LAYER_B], EXTERIOR)
    grid = SpectralGrid.uniform(Nz, 4.0, Nomega, omega_max)
    return prof, grid, discretize(prof, grid)


def homogeneous(Nz=16, Nomega=64, omega_max=20.0):
    lay = dict(LAYER_A, width=4.0)
    prof = slab_profile([lay], {k: v for k, v in lay.items() if k != "width"})
    grid = SpectralGrid.uniform(Nz, 4.0, Nomega, omega_max)
    return prof, grid, discretize(prof, grid)


def reference_dict():
    return json.loads(REFERENCE.read_text())


@pytest.fixture
def reference_config():
    return config_from_dict(reference_dict())


@pytest.fixture
def small():
    return two_layer(8, 32, 20.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
