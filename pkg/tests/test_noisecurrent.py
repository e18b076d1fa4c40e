import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarizon import noisecurrent as nc
from polarizon.medium import DomainError, SpectralGrid, discretize, slab_profile
from polarizon.oracle import OracleSystem
from polarizon.spectral import spectral_rule

from conftest import two_layer

PROF, GRID, SITES = two_layer(8, 32)


def vacuum_sites():
    lay = dict(alpha=0.0, rho=1.0, omega0=1.0, gamma=0.3, **{"lambda": 20.0})
    return discretize(slab_profile([dict(lay, width=4.0)], lay), GRID)


def test_canonical_pair():
    Pi = nc.OperatorCoefficients.unit(SITES, "Pi", [3])
    A = nc.OperatorCoefficients.unit(SITES, "A", [3])
    assert nc.commutator(Pi, A) == pytest.approx(-1j / SITES.dz, rel=1e-15)
    assert nc.commutator(A, A) == 0
    A2 = nc.OperatorCoefficients.unit(SITES, "A", [4])
    assert nc.commutator(Pi, A2) == 0


def test_commutator_with_vector_potential_gives_pi_coefficient():
    w = GRID.omega_nodes[5]
    J = nc.build_noise_current(SITES, [w])
    A = nc.OperatorCoefficients.unit(SITES, "A", np.arange(SITES.n))
    reg, _ = nc.commutator_matrix(J, A)
    assert np.max(np.abs(1j * reg - J.blocks["Pi"])) < 1e-10 * np.max(np.abs(J.blocks["Pi"]))


def test_source_term_commutators():
    p, p2 = 0.7 + 0.3j, 1.1 + 0.5j
    ff, fb = nc.source_commutator_targets(SITES, p, p2)
    F1 = nc.source_term_forward(SITES, p)
    r, _ = nc.commutator_matrix(F1, nc.source_term_forward(SITES, p2).conj())
    assert np.max(np.abs(r - ff)) < 1e-8 * np.max(np.abs(ff))
    r, _ = nc.commutator_matrix(F1, nc.source_term_backward(SITES, p2).conj())
    assert np.max(np.abs(r - fb)) < 1e-8 * np.max(np.abs(fb))


def test_source_term_hermiticity():
    p = 0.8 + 1.4j
    a, b = nc.source_term_forward(SITES, p).conj(), nc.source_term_forward(SITES, np.conj(p))
    for k in nc.BLOCKS:
        assert np.allclose(a.blocks[k], b.blocks[k], rtol=0, atol=1e-14)


def test_source_term_without_coupling():
    S = nc.source_term_forward(vacuum_sites(), 0.7 + 0.3j)
    assert np.abs(S.blocks["A"]).max() > 0 and np.abs(S.blocks["Pi"]).max() > 0
    assert not S.blocks["X"].any() and not S.blocks["P"].any()
    assert not S.poles[0].amp.any()


def test_noise_current_vanishes_without_coupling():
    s0 = vacuum_sites()
    w = GRID.omega_nodes[5]
    J = nc.build_noise_current(s0, [w])
    assert all(not J.blocks[k].any() for k in nc.BLOCKS)
    assert all(not p.amp.any() for p in J.poles)
    assert nc.eigenoperator_residual_rows(J, w) == 0.0


def test_reconstruction_needs_absorption():
    s0 = vacuum_sites()
    with pytest.raises(DomainError):
        nc.reconstruct_canonical(s0, spectral_rule(s0, GRID.omega_nodes, GRID.omega_weights), "A")


@pytest.mark.parametrize("k", [3, 6, 20])
def test_dual_construction(k):
    w = GRID.omega_nodes[k]
    J1 = nc.build_noise_current(SITES, [w])
    assert nc.dual_construction_residual(J1, nc.assemble_noise_current(SITES, w)) < 1e-8


@pytest.mark.parametrize("k", [2, 6, 15])
def test_eigenoperators(k):
    w = GRID.omega_nodes[k]
    assert nc.eigenoperator_residual_rows(nc.build_noise_current(SITES, [w]), w) < 1e-6
    assert nc.eigenoperator_residual_rows(nc.positive_frequency_field(SITES, w), w) < 1e-6


def test_kernel_commutators():
    rep = nc.jj_commutators(SITES, GRID.omega_nodes, GRID.omega_weights)
    assert rep.diag_residual < 2e-2
    assert rep.offdiag_max < 1e-6
    assert rep.jj_max < 1e-8
    # scale (1/pi) w^2 Im chi / (dz dw) written out at one node
    from polarizon.greenfn import chi_sites
    w = GRID.omega_nodes[7]
    expected = w**2 * chi_sites(SITES, [w])[0].imag / (np.pi * SITES.dz * GRID.domega)
    assert np.allclose(rep.diag_scale[7], expected, rtol=1e-12)


def test_long_time_current_kernels():
    rows = nc.long_time_noise_current(SITES, GRID.omega_nodes)
    assert not any(rows.blocks[k].any() for k in nc.BLOCKS)
    rep = nc.jj_commutators(SITES, GRID.omega_nodes, GRID.omega_weights, rows=rows)
    assert rep.diag_residual < 2e-2 and rep.offdiag_max < 1e-6 and rep.jj_max < 1e-8


@pytest.fixture(scope="module")
def rule():
    return spectral_rule(SITES, GRID.omega_nodes, GRID.omega_weights)


@pytest.mark.parametrize("target", ["A", "Pi", "X"])
def test_completeness(rule, target):
    r = nc.reconstruct_canonical(SITES, rule, target)
    assert r.target_error < 2e-2 and r.leakage < 2e-2


def test_hamiltonian(rule):
    h = nc.hamiltonian_diagonal_residual(SITES, rule)
    assert h.residual < 2e-2
    assert np.max(np.abs(h.pipi_ratio - 1)) < 2e-2
    assert h.aa_error < 2e-2


def test_generator_is_transpose_of_dynamics():
    sp = SITES.padded(2)
    a = nc.generator_matrix(sp, GRID.omega_nodes[:5], GRID.omega_weights[:5]).toarray()
    b = OracleSystem(sp, GRID.omega_nodes[:5], GRID.omega_weights[:5]) \
        .coefficient_generator().toarray()
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


# --- properties of the pairing ---------------------------------------------------

def random_ops(seed, R=3):
    rng = np.random.default_rng(seed)
    p = complex(rng.uniform(0.2, 2.0), rng.uniform(-3.0, 3.0))
    out = []
    for _ in range(2):
        O = nc.OperatorCoefficients.zeros(SITES, R)
        for k in nc.BLOCKS:
            O.blocks[k] = rng.standard_normal((R, SITES.n)) + 1j * rng.standard_normal((R, SITES.n))
        out.append(O)
    S = nc.source_term_forward(SITES, p).take(rng.choice(SITES.n, R, replace=False))
    return out[0], out[1], S, rng


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_antisymmetry(seed):
    O1, O2, S, _ = random_ops(seed)
    for a, b in ((O1, O2), (O1, S), (S, S.conj())):
        ab, _ = nc.commutator_matrix(a, b)
        ba, _ = nc.commutator_matrix(b, a)
        assert np.allclose(ab, -ba.T, rtol=1e-12, atol=1e-12 * np.abs(ab).max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bilinearity(seed):
    O1, O2, S, rng = random_ops(seed)
    a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    lhs, _ = nc.commutator_matrix(O1.scaled(a) + O2.scaled(b), S)
    r1, _ = nc.commutator_matrix(O1, S)
    r2, _ = nc.commutator_matrix(O2, S)
    assert np.allclose(lhs, a * r1 + b * r2, rtol=1e-12, atol=1e-12 * np.abs(lhs).max())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_generator_moves_functionals_with_the_state(seed):
    # d/dt <f, y> = <f, L y> = <G f, y> in the site/node weighted pairing
    rng = np.random.default_rng(seed)
    sp = SITES.padded(1)
    system = OracleSystem(sp, GRID.omega_nodes[:4], GRID.omega_weights[:4])
    f, y = rng.standard_normal(system.size), rng.standard_normal(system.size)
    W = system.metric
    lhs = f @ (W * (system.L @ y))
    rhs = (nc.generator_matrix(sp, GRID.omega_nodes[:4], GRID.omega_weights[:4]) @ f) @ (W * y)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
