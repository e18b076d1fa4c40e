import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarizon import susceptibility as sus
from polarizon.medium import DomainError, Layer, SpectralGrid


def layer(alpha=1.0, rho=1.0, omega0=1.0, gamma=0.1, lam=20.0):
    return Layer(0.0, 1.0, alpha, rho, omega0, gamma, lam)


def test_undamped_static_value():
    assert sus.chi_laplace(layer(gamma=0.0), 1.0) == pytest.approx(0.5, rel=1e-15)


def test_debye_closed_form_value():
    # 1 / (p^2 + w0^2 + gamma Lam p / (Lam + p)) written out by hand
    expected = 1 / (0.25 + 1 + 0.05 * 1000 / 1000.5)
    got = sus.chi_laplace(layer(gamma=0.1, lam=1000.0), 0.5)
    assert got == pytest.approx(expected, rel=1e-14)
    assert got.real == pytest.approx(0.769246, abs=1e-6)


def test_closed_form_against_bath_quadrature():
    lay = layer(gamma=0.3, lam=15.0)
    for p in (0.5, 2.0 + 1.0j, 0.05 + 3.0j):
        assert abs(sus.chi_laplace(lay, p) - sus.chi_laplace_quadrature(lay, p)) < \
            1e-9 * abs(sus.chi_laplace(lay, p))


def test_large_p_asymptote():
    lay = layer(alpha=1.3, rho=0.7)
    p = 1e6
    assert sus.chi_laplace(lay, p) * p**2 == pytest.approx(1.3**2 / 0.7, rel=1e-5)


@pytest.mark.parametrize("w", [1.0, 2.0])
def test_lorentz_limit(w):
    expected = 1 / (1 - w**2 - 0.1j * w)
    got = sus.chi_omega(layer(gamma=0.1, lam=1e6), w)
    assert abs(got - expected) < 1e-3 * abs(expected)
    if w == 2.0:
        assert got == pytest.approx(-0.33186 + 0.02212j, abs=1e-5)


def test_weak_damping_far_from_resonance_is_passive():
    chi = sus.chi_omega(layer(gamma=1e-4), np.array([0.2, 3.0, 10.0]))
    assert np.all(chi.imag > 0) and np.all(chi.imag < 1e-3)


def test_chi_domain():
    with pytest.raises(DomainError):
        sus.chi_laplace(layer(), -1.0)
    with pytest.raises(DomainError):
        sus.chi_omega(layer(), 0.0)


def test_no_zeros_in_right_half_plane():
    for g, lam in ((0.1, 20.0), (1.0, 5.0), (0.01, 100.0)):
        assert sus.denominator_zero_scan(layer(gamma=g, lam=lam)) == []


def test_negative_damping_has_zeros():
    zeros = sus.denominator_zero_scan(layer(gamma=-0.1))
    assert zeros
    for z in zeros:
        D = sus.denominator_laplace(1.0, -0.1, 20.0, z.p)
        assert abs(D) < 1e-10 and z.p.real > 0


def test_lossless_resonance_flagged_on_margin():
    zeros = sus.denominator_zero_scan(layer(gamma=0.0), region=((0.0, 10.0), (-10.0, 10.0)))
    assert {round(z.p.imag, 10) for z in zeros} == {-1.0, 1.0}
    assert all(z.margin for z in zeros)


def test_kk_lorentz_limit():
    grid = SpectralGrid.uniform(2, 1.0, 2048, 50.0)
    assert sus.kramers_kronig_residual(layer(lam=1e6), grid) < 1e-3


def test_kk_doubled_damping_same_order():
    grid = SpectralGrid.uniform(2, 1.0, 2048, 50.0)
    a = sus.kramers_kronig_residual(layer(gamma=0.3), grid)
    b = sus.kramers_kronig_residual(layer(gamma=0.6), grid)
    assert a < 1e-3 and b < 1e-3


def test_kk_truncation_failure_mode():
    lay = layer(gamma=0.5)
    short = SpectralGrid.uniform(2, 1.0, 2048, 2.0)
    assert sus.kramers_kronig_residual(lay, short, tail=False) > 1e-2
    assert sus.kramers_kronig_residual(lay, SpectralGrid.uniform(2, 1.0, 2048, 50.0)) < 1e-3


def test_moments_debye_layer():
    ra, rb, *_ = sus.chi_sum_rules(layer(gamma=0.3, lam=20.0),
                                   SpectralGrid.uniform(2, 1.0, 2048, 50.0))
    assert ra < 1e-2 and rb < 1e-2


def test_moments_vanish_without_coupling():
    ra, rb, va, vb, ta, tb = sus.chi_sum_rules(layer(alpha=0.0),
                                               SpectralGrid.uniform(2, 1.0, 512, 50.0))
    assert ta == 0 and tb == 0 and ra < 1e-12 and rb < 1e-12


def test_first_moment_residue_value():
    # Lorentz limit: omega chi ~ -a/omega at large omega, analytic above the axis,
    # so the full-line integral is i pi a from the large semicircle.
    lay = layer(alpha=1.5, rho=1.2, lam=1e6)
    _, _, va, *_ = sus.chi_sum_rules(lay, SpectralGrid.uniform(2, 1.0, 4096, 50.0))
    assert abs(va - 1j * math.pi * 1.5**2 / 1.2) < 1e-2 * math.pi * 1.5**2 / 1.2


@pytest.mark.parametrize("p,p2,tol", [(1.0, 2.0, 1e-6), (0.1, 10.0, 1e-5)])
def test_bath_identity(p, p2, tol):
    assert sus.bath_auxiliary_identity_residual(layer(gamma=0.2), p, p2) < tol


def test_bath_identity_zero_coupling():
    assert sus.bath_auxiliary_identity_residual(layer(gamma=0.0), 1.0, 2.0) == 0.0


def test_bath_identity_domain():
    with pytest.raises(DomainError):
        sus.bath_auxiliary_identity_residual(layer(), 1.0, 1.0)
    with pytest.raises(DomainError):
        sus.bath_auxiliary_identity_residual(layer(), -1.0, 1.0)


params = st.tuples(st.floats(0.1, 3.0), st.floats(0.2, 3.0), st.floats(0.2, 4.0),
                   st.floats(1e-3, 2.0), st.floats(5.0, 100.0))


@settings(max_examples=60, deadline=None)
@given(params, st.floats(0.01, 60.0))
def test_passivity(par, w):
    assert sus.chi_omega(layer(*par), w).imag > 0


@settings(max_examples=60, deadline=None)
@given(params, st.complex_numbers(min_magnitude=0.05, max_magnitude=50.0))
def test_reality_under_conjugation(par, p):
    p = complex(abs(p.real) + 1e-3, p.imag)
    lay = layer(*par)
    a, b = sus.chi_laplace(lay, p.conjugate()), sus.chi_laplace(lay, p).conjugate()
    assert abs(a - b) <= 1e-13 * abs(a)


@settings(max_examples=40, deadline=None)
@given(params, st.floats(0.05, 30.0))
def test_omega_form_is_boundary_value(par, w):
    lay = layer(*par)
    eps = 1e-9
    near = sus.chi_laplace(lay, complex(eps, -w))
    assert cmath.isclose(near, sus.chi_omega(lay, w), rel_tol=1e-6)
