import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarizon import greenfn as gf
from polarizon.medium import DomainError, SpectralGrid, discretize, slab_profile

from conftest import homogeneous, two_layer


def uniform(alpha, gamma=0.3, omega0=1.0, width=4.0):
    lay = dict(alpha=alpha, rho=1.0, omega0=omega0, gamma=gamma, **{"lambda": 20.0})
    return slab_profile([dict(lay, width=width)], lay)


def test_vacuum_diagonal():
    G = gf.build_green(uniform(0.0), 1.0, SpectralGrid.uniform(16, 4.0, 8, 10.0))
    assert np.allclose(np.diag(G.matrix()), -0.5j, atol=1e-14)


def test_lossy_homogeneous_closed_form():
    prof = uniform(1.2, gamma=0.4)
    w = 1.3
    G = gf.build_green(prof, w)
    eps = 1 + 1.2**2 / (1 + (-1j * w) ** 2 + 0.4 * 20 * (-1j * w) / (20 - 1j * w))
    n = cmath.sqrt(eps)
    n = n if n.imag > 0 else -n
    z, zp = np.array([0.3, 1.7, 3.9, -1.0]), np.array([2.2, 0.1, 3.9, 5.0])
    expected = np.exp(1j * w * n * np.abs(z - zp)) / (2j * w * n)
    assert np.allclose(G.eval(z, zp), expected, rtol=1e-12, atol=0)


def test_derivative_jump_is_one():
    prof, grid, _ = two_layer(16)
    G = gf.build_green(prof, 1.7, grid)
    assert np.allclose(G.derivative_jump(np.array([0.3, 2.0, 3.1, -0.5])), 1.0, atol=1e-12)


def test_reciprocity_three_layers():
    lays = [dict(width=1.0, alpha=1.0, rho=1.0, omega0=1.0, gamma=0.2, **{"lambda": 20.0}),
            dict(width=1.5, alpha=2.0, rho=0.5, omega0=2.0, gamma=0.4, **{"lambda": 20.0}),
            dict(width=0.7, alpha=0.5, rho=2.0, omega0=0.7, gamma=0.1, **{"lambda": 20.0})]
    prof = slab_profile(lays, dict(alpha=0.3, rho=1.0, omega0=1.0, gamma=0.5, **{"lambda": 20.0}))
    G = gf.build_green(prof, 1.1)
    pairs = np.random.default_rng(3).uniform(-1.0, 4.2, (100, 2))
    assert gf.reciprocity_residual(G, pairs) < 1e-12


def test_dense_oracle():
    _, _, sites = two_layer(24)
    w = np.array([0.3, 1.0, 2.2, 7.5])
    a, b = gf.lattice_green(sites, w).G, gf.lattice_green_dense(sites, w).G
    assert np.max(np.abs(a - b)) < 1e-6 * np.max(np.abs(b))
    assert gf.reciprocity_residual(b) < 1e-6


def test_defining_residual_second_order():
    prof, _, _ = homogeneous()
    res = [gf.defining_residual(gf.build_green(prof, 1.3, SpectralGrid.uniform(n, 4.0, 8, 10.0)),
                                prof) for n in (128, 256, 512)]
    assert res[2] < 1e-3
    assert 3.5 < res[0] / res[1] < 4.5 and 3.5 < res[1] / res[2] < 4.5


def test_adjoint_residual_matches():
    prof, grid, _ = two_layer(64)
    G = gf.build_green(prof, 1.3, grid)
    a = gf.defining_residual(G, prof)
    b = gf.defining_residual(G, prof, adjoint=True)
    assert abs(a - b) < 1e-10


def test_optical_theorem():
    prof, grid, _ = homogeneous()
    assert gf.optical_theorem_residual(prof, 1.2, 1.2, grid) < 1e-4
    prof, grid, _ = two_layer()
    assert gf.optical_theorem_residual(prof, 0.9, 1.6, grid) < 1e-3


def test_optical_theorem_empty_medium():
    lay = dict(alpha=1e-8, rho=1.0, omega0=1.0, gamma=1e-4, **{"lambda": 20.0})
    prof = slab_profile([dict(lay, width=2.0)], lay)
    G1, G2 = gf.build_green(prof, 0.8), gf.build_green(prof, 1.3)
    for z, zp in ((0.3, 0.3), (0.5, 1.7)):
        lhs, rhs = gf.optical_theorem_sides(prof, 0.8, 1.3, z, zp, G1, G2)
        assert abs(lhs) < 1e-8 and abs(rhs) < 1e-8 and abs(lhs - rhs) < 1e-8


def test_build_domain():
    with pytest.raises(DomainError):
        gf.build_green(uniform(1.0), 0.0)


def test_first_sum_rule_value():
    lay = dict(alpha=1.0, rho=1.0, omega0=1.0, gamma=0.5, **{"lambda": 20.0})
    prof = slab_profile([dict(lay, width=0.25)], lay)
    grid = SpectralGrid.uniform(16, 0.25, 8, 300.0)
    sites = discretize(prof, grid)
    r = gf.sum_rule(sites, "wG", grid.omega_max)
    d = np.diag(r.value)
    assert np.all(np.abs(d - (-1j * np.pi * 64)) < 0.02 * np.pi * 64)
    i, j = np.indices(r.value.shape)
    far = np.abs(i - j) > 4
    assert np.max(np.abs(r.value[far])) < 0.02 * np.pi * 64


def test_sum_rules_on_two_layers():
    _, grid, sites = two_layer()
    for rule in gf.SUM_RULES:
        r = gf.sum_rule(sites, rule, grid.omega_max)
        assert r.diagonal_residual() < 2e-2 and r.offdiagonal_residual() < 2e-2, rule
    r = gf.sum_rule(sites, "w3G", grid.omega_max)
    assert r.stencil_residual() < 2e-2


def test_sum_rule_at_picks_nodes():
    prof, grid, sites = two_layer()
    full = gf.sum_rule(sites, "wG", grid.omega_max).value
    assert gf.sum_rule_at(prof, grid, 1.1, 2.6, "wG") == pytest.approx(full[4, 10])


def test_large_frequency_asymptote():
    _, _, sites = two_layer()
    probe = gf.analyticity_probe(sites, [1e3, 1e4])
    assert np.all(np.abs(probe[-1] - 1) < 1e-3)


def test_wronskian_constant():
    prof, grid, _ = two_layer(32)
    assert gf.wronskian_variation(gf.build_green(prof, 2.3, grid)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.05, 2.0), st.floats(0.3, 3.0), st.floats(0.1, 8.0))
def test_lattice_green_symmetric(alpha, gamma, omega0, w):
    lay = dict(alpha=alpha, rho=1.0, omega0=omega0, gamma=gamma, **{"lambda": 30.0})
    prof = slab_profile([dict(lay, width=1.5), dict(lay, width=1.0, alpha=alpha / 2 + 0.1)],
                        dict(lay, alpha=0.2), check=False)
    sites = discretize(prof, SpectralGrid.uniform(10, 2.5, 4, 10.0))
    G = gf.lattice_green(sites, [w]).G
    assert gf.reciprocity_residual(G) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.05, 1.0), st.floats(0.2, 6.0))
def test_passive_green_diagonal(alpha, gamma, w):
    # absorption: Im G(z, z) < 0 for the retarded convention G = e^{ik|d|}/(2ik)
    lay = dict(alpha=alpha, rho=1.0, omega0=1.0, gamma=gamma, **{"lambda": 30.0})
    prof = slab_profile([dict(lay, width=2.0)], lay, check=False)
    G = gf.build_green(prof, w, z_nodes=np.linspace(0.1, 1.9, 5))
    assert np.all(np.diag(G.matrix()).imag < 0)
