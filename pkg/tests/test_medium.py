import math

import numpy as np
import pytest

from polarizon.medium import (ConfigError, DomainError, Layer, SpectralGrid, config_from_dict,
                              coupling_v, load_config, renormalized_frequency_sq, sample_at)

from conftest import REFERENCE, reference_dict, two_layer


def layer(**kw):
    base = dict(z_start=0.0, z_end=1.0, alpha=1.0, rho=1.0, omega0=1.0, gamma=0.1,
                cutoff_lambda=20.0)
    base.update(kw)
    return Layer(**base)


def test_sample_inside_first_layer():
    prof, _, _ = two_layer()
    assert sample_at(prof, 1.0) is prof.layers[0]


def test_sample_on_interface_takes_right_layer():
    prof, _, _ = two_layer()
    assert sample_at(prof, 2.0) is prof.layers[1]


def test_sample_at_far_edge_is_last_layer():
    prof, _, _ = two_layer()
    assert sample_at(prof, 4.0) is prof.layers[-1]
    with pytest.raises(DomainError):
        sample_at(prof, 4.5)


def test_coupling_at_zero_frequency():
    # independent: rho sqrt(2 gamma / pi) with gamma = 0.1
    assert coupling_v(layer(gamma=0.1, cutoff_lambda=7.0), 0.0) == pytest.approx(
        math.sqrt(0.2 / math.pi), rel=1e-14)
    assert coupling_v(layer(gamma=0.1), 0.0) == pytest.approx(0.25231, abs=5e-6)


def test_coupling_vanishes_without_damping():
    assert np.all(coupling_v(layer(gamma=0.0), np.linspace(0, 50, 11)) == 0)


def test_coupling_at_cutoff():
    lay = layer(rho=2.0, gamma=0.3, cutoff_lambda=5.0)
    assert coupling_v(lay, 5.0) == pytest.approx(2.0 * math.sqrt(0.3 / math.pi), rel=1e-14)


@pytest.mark.parametrize("w0,g,lam,expected", [(1.0, 0.1, 100.0, 11.0), (2.0, 0.05, 40.0, 6.0),
                                               (1.5, 0.0, 10.0, 2.25)])
def test_renormalized_frequency(w0, g, lam, expected):
    assert renormalized_frequency_sq(layer(omega0=w0, gamma=g, cutoff_lambda=lam)) == \
        pytest.approx(expected, rel=1e-14)


def test_reference_config_loads():
    cfg = load_config(REFERENCE)
    assert cfg.grid.Nz == 8 and cfg.grid.dz == pytest.approx(0.5)
    q = cfg.quick_version()
    assert q.grid.Nomega == 64 and cfg.tolerance_scale == 10.0


def test_zero_damping_names_the_layer():
    d = reference_dict()
    d["layers"][0]["gamma"] = 0.0
    with pytest.raises(ConfigError, match=r"layers\[0\]\.gamma"):
        config_from_dict(d)


def test_missing_key_reports_path():
    d = reference_dict()
    del d["exterior"]["lambda"]
    with pytest.raises(ConfigError, match="exterior: missing key"):
        config_from_dict(d)
    d = reference_dict()
    del d["grid"]["Nz"]
    with pytest.raises(ConfigError, match="grid: missing key Nz"):
        config_from_dict(d)


def test_layers_must_be_contiguous():
    d = reference_dict()
    d["layers"].append(dict(d["layers"][0], z_start=5.0, z_end=6.0))
    with pytest.raises(ConfigError, match="does not continue"):
        config_from_dict(d)


def test_grid_nodes_are_midpoints():
    g = SpectralGrid.uniform(4, 2.0, 8, 4.0)
    assert np.allclose(g.z_nodes, [0.25, 0.75, 1.25, 1.75])
    assert np.allclose(g.omega_nodes[:2], [0.25, 0.75])
    assert g.omega_weights.sum() == pytest.approx(4.0)
    with pytest.raises(ConfigError):
        SpectralGrid.uniform(1, 1.0, 8, 1.0)
