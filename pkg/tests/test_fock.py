import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dephasim import fock
from dephasim.errors import ConvergenceError, DomainError, StepSizeError, TruncationError
from dephasim.params import ModeParams


def test_annihilation_and_number():
    assert np.array_equal(fock.annihilation_op(2), np.array([[0, 1], [0, 0]]))
    b = fock.annihilation_op(6)
    assert np.allclose(b.conj().T @ b, fock.number_op(6))
    with pytest.raises(DomainError):
        fock.annihilation_op(1)


def test_identity_operators():
    assert np.allclose(fock.displacement_op(0, 16), np.eye(16))
    assert np.allclose(fock.squeeze_op(0, 16), np.eye(16))


def test_vacuum_overlap_of_displacement():
    d = fock.displacement_op(0.5, 32)
    assert abs(d[0, 0]) == pytest.approx(math.exp(-0.125), abs=1e-8)
    assert abs(d[0, 0]) == pytest.approx(0.882497, abs=1e-6)


def test_leakage_raises_with_suggestion():
    with pytest.raises(TruncationError) as info:
        fock.displacement_op(4.0, 8)
    assert info.value.suggested_dim == 16


def test_thermal_state():
    assert np.allclose(fock.thermal_state(1.0, 0.0, 8), np.diag([1.0] + [0.0] * 7))
    rho = fock.thermal_state(1.0, 1.0, 64)
    nbar = 1 / (math.e - 1)
    assert fock.moments(rho).n_mean == pytest.approx(nbar, rel=1e-9)
    assert nbar == pytest.approx(0.581977, abs=1e-6)
    with pytest.raises(TruncationError):
        fock.thermal_state(1.0, 1.0, 8)


def test_mode_state_examples():
    m = ModeParams(1.0, 0.1, 0.0, 0.4, 0.7)
    rho0 = fock.squeezed_thermal_state(m, 0.3, 128)[:32, :32]
    for p_e in (0.0, 0.3, 1.0):
        assert np.allclose(fock.mode_state(0.0, m, 0.3, p_e, 32), rho0, atol=1e-12)
    coherent = fock.mode_state(1.0, ModeParams(1.0, 0.3), 0.0, p_e=1.0)
    assert fock.von_neumann_entropy(coherent) == pytest.approx(0.0, abs=1e-10)
    fock.check_state(fock.mode_state(math.pi / 2, ModeParams(1.0, 0.1), 0.3))
    with pytest.raises(DomainError):
        fock.mode_state(1.0, m, 0.3, p_e=1.5)


def test_eigen_examples():
    e = fock.hermitian_eigen(np.diag([0.1, 0.7, 0.2]))
    assert np.allclose(e.eigenvalues, [0.7, 0.2, 0.1])
    assert np.allclose(np.abs(e.eigenvectors), np.eye(3)[:, [1, 2, 0]])
    e = fock.hermitian_eigen(np.array([[0, 1], [1, 0]]))
    assert np.allclose(e.eigenvalues, [1, -1])
    with pytest.raises(DomainError):
        fock.hermitian_eigen(np.array([[0, 1], [0, 0]]))
    rng = np.random.default_rng(3)
    z = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    with pytest.raises(ConvergenceError):
        fock.hermitian_eigen(z + z.conj().T, max_sweeps=1)


def test_entropy_examples():
    pure = np.zeros((4, 4)); pure[1, 1] = 1.0
    assert fock.von_neumann_entropy(pure) == pytest.approx(0.0, abs=1e-15)
    mixed = np.diag([0.5, 0.5, 0.0, 0.0])
    assert fock.von_neumann_entropy(mixed) == pytest.approx(math.log(2))
    nbar = 1 / (math.e - 1)
    want = (nbar + 1) * math.log(nbar + 1) - nbar * math.log(nbar)
    assert want == pytest.approx(1.040652, abs=1e-6)
    assert fock.von_neumann_entropy(fock.thermal_state(1.0, 1.0, 64)) == pytest.approx(want, rel=1e-10)


def test_entropy_rate_fd_examples():
    m = ModeParams(1.0, 0.1, 0.0, 0.3, 0.5)
    for t in (0.3, 1.0, 2.5):
        assert fock.entropy_rate_fd(t, m, 0.3, p_e=1.0) == pytest.approx(0.0, abs=1e-9)
    # S(t) is even around t = 0, so the slope there vanishes as t -> 0
    early = fock.entropy_rate_fd(2e-3, ModeParams(1.0, 0.1), 0.3)
    later = fock.entropy_rate_fd(0.2, ModeParams(1.0, 0.1), 0.3)
    assert abs(early) < 0.02 * abs(later)
    with pytest.raises(DomainError):
        fock.entropy_rate_fd(1e-4, m, 0.3)
    with pytest.raises(StepSizeError):
        fock.entropy_rate_fd(1.0, ModeParams(1.0, 0.3), 0.3, h=0.9)


def test_moment_examples():
    vac = fock.thermal_state(1.0, 0.0, 16)
    assert fock.moments(vac) == (0.0, 0, 0)
    s = fock.squeeze_op(0.5, 48)
    vac48 = fock.thermal_state(1.0, 0.0, 48)
    mom = fock.moments(s @ vac48 @ s.conj().T)
    assert mom.n_mean == pytest.approx(math.sinh(0.5) ** 2, rel=1e-10)
    assert mom.n_mean == pytest.approx(0.271540, abs=1e-6)
    assert mom.a_sq == pytest.approx(-0.5 * math.sinh(1.0), rel=1e-10)
    assert mom.a_sq.real == pytest.approx(-0.587600, abs=1e-6)
    alpha = 0.4 - 0.3j
    d = fock.displacement_op(alpha, 48)
    mom = fock.moments(d @ vac48 @ d.conj().T)
    assert mom.a_mean == pytest.approx(alpha, abs=1e-12)
    assert mom.n_mean == pytest.approx(abs(alpha) ** 2, abs=1e-12)


def test_approx_rate_examples():
    m = ModeParams(1.0, 0.1)
    assert fock.approx_entropy_rate_mode(0.0, m, 0.3) == 0.0
    assert fock.approx_entropy_rate_mode(math.pi / 2, m, 0.3) == pytest.approx(2 * 0.01 / 0.3)
    sq = ModeParams(1.0, 0.1, 0.0, 1.0, 0.0)
    assert fock.approx_entropy_rate_mode(math.pi, sq, 0.3) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        fock.approx_entropy_rate_mode(1.0, m, 0.0)


def test_wigner_examples():
    vac = fock.GaussianBranch(1.0, [0.0, 0.0], 0.5 * np.eye(2))
    assert fock.wigner_grid([vac], [0.0], [0.0])[0, 0] == pytest.approx(1 / math.pi)
    a, b = (fock.GaussianBranch(0.5, [s * 6.0, 0.0], 0.5 * np.eye(2)) for s in (1, -1))
    w = fock.wigner_grid([a, b], [-6.0, 0.0, 6.0], [0.0])
    assert w[0, 0] == pytest.approx(0.5 / math.pi, rel=1e-12)
    assert w[2, 0] == pytest.approx(0.5 / math.pi, rel=1e-12)
    assert w[1, 0] < 1e-15
    with pytest.raises(DomainError):
        fock.wigner_grid([fock.GaussianBranch(1.0, [0, 0], np.diag([1.0, -1.0]))], [0.0], [0.0])
    with pytest.raises(DomainError):
        fock.wigner_grid([a], [0.0], [0.0])


def test_fig2a_branch_means_match_fock_moments():
    m = ModeParams(1.0, 0.1)
    t = math.pi / 2
    plus, minus = fock.mode_branches(m, 0.3, t)
    assert m.alpha(t) == pytest.approx(0.1 * (1 - 1j))
    assert plus.mean == pytest.approx(math.sqrt(2) * np.array([0.1, -0.1]))
    assert minus.mean == pytest.approx(-plus.mean)
    for sign, br in ((1, plus), (-1, minus)):
        rho = fock.mode_state(t, m, 0.3, p_e=1.0 if sign > 0 else 0.0)
        got = fock.moments(rho)
        want = br.moments()
        assert got.a_mean == pytest.approx(want.a_mean, abs=1e-9)
        assert got.n_mean == pytest.approx(want.n_mean, abs=1e-9)


def test_branch_from_params_examples():
    m = ModeParams(1.0, 0.2, 0.0, 0.0, 0.0)
    br = fock.gaussian_branch_from_params(m, 0.0, +1, 0.0)
    assert np.allclose(br.mean, 0.0)
    assert np.allclose(br.covariance, 0.5 * np.eye(2))
    with pytest.raises(DomainError):
        fock.gaussian_branch_from_params(m, 0.0, 0, 0.0)


def test_wigner_lattice_integrates_to_one():
    br = fock.mode_branches(ModeParams(1.0, 0.5, 0.2, 0.6, 1.0), 0.4, 1.0)
    x, p = fock.wigner_lattice(br, n=201)
    w = fock.wigner_grid(br, x, p)
    assert w.sum() * (x[1] - x[0]) * (p[1] - p[0]) == pytest.approx(1.0, abs=1e-8)


sizes = st.integers(1, 24)


@settings(max_examples=30, deadline=None)
@given(sizes, st.integers(0, 2 ** 32 - 1))
def test_eigen_matches_reference(n, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = z + z.conj().T
    e = fock.hermitian_eigen(h)
    assert np.allclose(e.eigenvalues, np.linalg.eigvalsh(h)[::-1], atol=1e-10)
    assert np.allclose(h @ e.eigenvectors, e.eigenvectors * e.eigenvalues, atol=1e-10)
    assert np.allclose(e.eigenvectors.conj().T @ e.eigenvectors, np.eye(n), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.5), st.floats(0.0, 2 * math.pi), st.floats(0.0, 0.6), st.floats(0.0, 2 * math.pi))
def test_operators_unitary_and_composable(amp, phase, r, theta):
    alpha = amp * complex(math.cos(phase), math.sin(phase))
    xi = r * complex(math.cos(theta), math.sin(theta))
    d = fock.displacement_op(alpha, 48)
    s = fock.squeeze_op(xi, 48)
    assert fock.unitarity_residual(d) < 1e-8
    assert fock.unitarity_residual(s) < 1e-8
    # D(a) D(-a) = 1 on the resolved low-number block
    assert np.allclose((d @ fock.displacement_op(-alpha, 48))[:16, :16], np.eye(16), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi), st.floats(0.0, 1.0),
       st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi))
def test_gaussian_fock_moment_duality(r, theta, temp, amp, phase):
    m = ModeParams(1.0, amp / 2, phase, r, theta)
    rho = fock.mode_state(math.pi, m, temp, p_e=1.0)
    got = fock.moments(rho)
    want = fock.gaussian_branch_from_params(m, temp, +1, math.pi).moments()
    assert got.n_mean == pytest.approx(want.n_mean, abs=1e-6)
    assert got.a_sq == pytest.approx(want.a_sq, abs=1e-6)
    assert got.a_mean == pytest.approx(want.a_mean, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 4 * math.pi), st.floats(0.0, 1.0), st.floats(0.05, 1.0))
def test_mode_state_is_a_density_matrix(t, p_e, temp):
    rho = fock.mode_state(t, ModeParams(1.0, 0.2, 0.3, 0.3, 0.9), temp, p_e)
    fock.check_state(rho)
    s = fock.von_neumann_entropy(rho)
    assert 0.0 <= s <= math.log(rho.shape[0])
