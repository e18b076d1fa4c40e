import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarizon.medium import ConfigError, SpectralGrid, discretize, slab_profile
from polarizon.oracle import (ClassicalState, OracleSystem, check_step, embed, integrate_eom,
                              random_initial)
from polarizon.spectral import ClassicalData
from polarizon.suites import embed_fields, free_wave_error, oracle_run

from conftest import two_layer

PROF, GRID, SITES = two_layer(8, 16)


def small_system(pad=3):
    return OracleSystem(SITES.padded(pad), GRID.omega_nodes, GRID.omega_weights)


def test_step_limit():
    dz = SITES.dz
    check_step(0.1 * min(2 * np.pi / 20.0, dz), 20.0, dz)
    with pytest.raises(ConfigError):
        check_step(0.2 * dz, 20.0, dz)


def test_zero_state_stays_zero():
    s = small_system()
    h = integrate_eom(s, embed_fields(s), 2.0, 0.02, 5)
    assert not h.states.any()


def test_energy_conserved():
    s = small_system()
    rng = np.random.default_rng(0)
    st0 = embed(random_initial(SITES.padded(1), GRID.omega_nodes, rng), s.N, 2)
    h = integrate_eom(s, st0, 20.0, 0.1 * min(2 * np.pi / GRID.omega_max, SITES.dz), 11)
    assert h.energy_drift() < 1e-6


def test_free_wave_second_order():
    e1, e2 = free_wave_error(128), free_wave_error(256)
    assert 3.4 < e1 / e2 < 4.6


def test_state_vector_roundtrip():
    s = small_system(1)
    y = np.random.default_rng(2).standard_normal(s.size)
    assert np.array_equal(ClassicalState.from_vector(y, s.N, s.K).vector(), y)


@pytest.fixture(scope="module")
def lossy_layer():
    lay = dict(width=4.0, alpha=1.0, rho=1.0, omega0=1.0, gamma=0.3, **{"lambda": 5.0})
    ext = dict(alpha=0.5, rho=1.0, omega0=1.5, gamma=0.5, **{"lambda": 5.0})
    with pytest.warns(UserWarning):
        prof = slab_profile([lay], ext)
    grid = SpectralGrid.uniform(16, 4.0, 512, 60.0)
    return discretize(prof, grid), grid


def test_bath_only_data(lossy_layer):
    sites, grid = lossy_layer
    d = random_initial(sites.padded(4), grid.omega_nodes, np.random.default_rng(5))
    z = np.zeros_like(d.A)
    data = ClassicalData(z, z, z, z, d.Y, d.Q)
    _, errs = oracle_run(sites, grid, 20.0, None, n_samples=21, data=data)
    assert max(errs.values()) < 1e-3


def test_zero_data_zero_error(lossy_layer):
    sites, grid = lossy_layer
    C, K = sites.n + 8, grid.Nomega
    z = np.zeros(C)
    data = ClassicalData(z, z, z, z, np.zeros((C, K)), np.zeros((C, K)))
    _, errs = oracle_run(sites, grid, 1.0, None, n_samples=3, data=data)
    assert max(errs.values()) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    s = small_system(1)
    rng = np.random.default_rng(seed)
    y1, y2 = rng.standard_normal(s.size), rng.standard_normal(s.size)
    from polarizon.oracle import taylor_step
    dt = 0.01
    lhs = taylor_step(s.L, a * y1 + b * y2, dt)
    rhs = a * taylor_step(s.L, y1, dt) + b * taylor_step(s.L, y2, dt)
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(lhs).max()))
