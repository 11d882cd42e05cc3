import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dephasim import decay, tls
from dephasim.errors import DomainError
from dephasim.params import BathSpectrum, SqueezeParams, TlsState

HALF = TlsState(0.5, 0.5, 0.5)


def test_evolve_system():
    assert tls.evolve_system(HALF, 0.0) == HALF
    gone = tls.evolve_system(HALF, math.inf)
    assert gone.coherence == 0 and gone.p_e == 0.5
    assert tls.evolve_system(HALF, math.log(2)).coherence == pytest.approx(0.25)
    with pytest.raises(DomainError):
        tls.evolve_system(HALF, -0.1)


def test_bloch_examples():
    v = tls.bloch(TlsState(1.0, 0.0, 0.0))
    assert tuple(v) == (0.0, 0.0, 1.0) and v.u == 1.0
    v = tls.bloch(HALF)
    assert tuple(v) == (1.0, 0.0, 0.0) and v.u == 1.0
    assert tls.bloch(TlsState(0.5, 0.5, 0.25)).u == pytest.approx(0.5)


def test_entropy_examples():
    assert tls.entropy_tls(0.0) == pytest.approx(math.log(2))
    assert tls.entropy_tls(1.0) == 0.0
    assert tls.entropy_tls(0.5) == pytest.approx(0.562335, abs=1e-6)
    lam = np.array([0.75, 0.25])
    assert tls.entropy_tls(0.5) == pytest.approx(-np.sum(lam * np.log(lam)), rel=1e-14)
    assert tls.entropy_tls(1.0 + 5e-13) == 0.0
    with pytest.raises(DomainError):
        tls.entropy_tls(1.001)
    with pytest.raises(DomainError):
        tls.entropy_tls(-0.01)


def test_entropy_rate_examples():
    v = tls.BlochVector(0.5, 0.0, 0.0)
    assert tls.entropy_rate_tls(v, (0.0, 0.0, 0.0)) == 0.0
    assert tls.entropy_rate_tls(v, (-0.1, 0.0, 0.0)) == pytest.approx(0.05 * math.log(3))
    with pytest.raises(DomainError):
        tls.entropy_rate_tls(tls.BlochVector(0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def test_entropy_rate_matches_difference_of_entropy():
    state = TlsState(0.6, 0.4, 0.3 + 0.2j)
    g, gdot, h = 0.4, 0.7, 1e-6

    def s(gg):
        return tls.state_entropy(tls.evolve_system(state, gg))

    cur = tls.evolve_system(state, g)
    v = tls.bloch(cur)
    rate = tls.entropy_rate_tls(v, tls.dephasing_bloch_rate(v, gdot))
    fd = gdot * (s(g + h) - s(g - h)) / (2 * h)
    assert rate == pytest.approx(fd, rel=1e-6)


def test_markov_generator_structure():
    rho = TlsState(0.7, 0.3, 0.2 - 0.1j).matrix()
    out = tls.markov_generator(rho, 0.5)
    sz = tls.SIGMA_Z
    assert np.allclose(out, 0.5 * (sz @ rho @ sz - rho))
    assert np.allclose(np.diag(out), 0.0)


def test_markov_solution():
    assert tls.markov_solution(HALF, 0.3, 0.0) == HALF
    s = tls.markov_solution(HALF, 0.25, 2.0)
    assert s.coherence == pytest.approx(0.5 * math.exp(-1.0))
    with pytest.raises(DomainError):
        tls.markov_solution(HALF, -1.0, 1.0)
    with pytest.raises(DomainError):
        tls.markov_solution(HALF, 1.0, -1.0)


states = st.builds(
    lambda p, frac, phase: TlsState.from_excited(p, frac * math.sqrt(p * (1 - p)) * complex(math.cos(phase), math.sin(phase))),
    st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi))


@given(states, st.floats(0.0, 50.0))
def test_dephasing_keeps_populations_and_raises_entropy(state, g):
    out = tls.evolve_system(state, g)
    assert out.p_e == state.p_e
    assert abs(out.coherence) <= abs(state.coherence)
    assert tls.state_entropy(out) >= tls.state_entropy(state) - 1e-12


@given(states)
def test_entropy_matches_eigenvalues(state):
    lam = np.linalg.eigvalsh(state.matrix())
    lam = lam[lam > 1e-300]
    assert tls.state_entropy(state) == pytest.approx(float(-np.sum(lam * np.log(lam))), abs=1e-9)


@given(st.floats(0.0, 1.5), st.floats(0.0, 2 * math.pi))
def test_entropy_rate_nonnegative_along_exact_path(r, dth):
    sp = BathSpectrum(0.1, 1.0, 0.0)
    sq = SqueezeParams(r, dth)
    ts = np.linspace(0.05, 20.0, 40)
    g = decay.gamma(ts, sp, sq, "zero_t")
    gd = decay.gamma_rate(ts, sp, sq, "zero_t")
    for gi, gdi in zip(g, gd):
        v = tls.bloch(tls.evolve_system(HALF, float(gi)))
        assert tls.entropy_rate_tls(v, tls.dephasing_bloch_rate(v, float(gdi))) >= 0.0
