"""Two-level system: exact dephasing, Bloch-vector entropy, Markov channel.

Sign convention: with ``rho_eg = <e|rho|g>`` the Bloch vector is
``v = (2 Re rho_eg, -2 Im rho_eg, p_e - p_g)``. The norm ``u`` and every
entropy are independent of this choice.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .params import TlsState

U_SLACK = 1e-12
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


class BlochVector(NamedTuple):
    v_x: float
    v_y: float
    v_z: float

    @property
    def u(self) -> float:
        return math.sqrt(self.v_x ** 2 + self.v_y ** 2 + self.v_z ** 2)


def evolve_system(initial: TlsState, gamma_value: float) -> TlsState:
    """Apply the exact dephasing map: coherence times ``exp(-Gamma)``."""
    if gamma_value < 0:
        raise DomainError("decay factor must be >= 0")
    if math.isinf(gamma_value):
        return TlsState(initial.p_e, initial.p_g, 0j)
    return TlsState(initial.p_e, initial.p_g, initial.coherence * math.exp(-gamma_value))


def bloch(state: TlsState) -> BlochVector:
    c = state.coherence
    return BlochVector(2.0 * c.real, -2.0 * c.imag, state.p_e - state.p_g)


def entropy_tls(u) -> float:
    """Von Neumann entropy (nats) of a qubit with Bloch norm ``u``."""
    uu = np.asarray(u, dtype=float)
    if np.any(uu < -U_SLACK) or np.any(uu > 1.0 + U_SLACK):
        raise DomainError("Bloch norm must lie in [0, 1]")
    uu = np.clip(uu, 0.0, 1.0)
    plus, minus = 1.0 + uu, 1.0 - uu
    with np.errstate(divide="ignore", invalid="ignore"):
        term = plus * np.log(plus) + np.where(minus > 0, minus * np.log(np.where(minus > 0, minus, 1.0)), 0.0)
    s = math.log(2.0) - 0.5 * term
    return float(s) if np.ndim(s) == 0 else s


def entropy_rate_tls(v: BlochVector, v_dot) -> float:
    """dS/dt from the Bloch vector and its rate (v_z is conserved here).

    Undefined at ``u = 0``; there the caller should difference :func:`entropy_tls`.
    """
    u = v.u
    if u == 0.0:
        raise DomainError("entropy rate is singular at u = 0; use a finite difference of entropy_tls")
    if u >= 1.0:
        # pure state: the log diverges but u can only decrease, u_dot = 0 at the boundary
        u = 1.0 - 1e-16
    dvx, dvy = v_dot[0], v_dot[1]
    u_dot = (v.v_x * dvx + v.v_y * dvy) / v.u
    if u_dot == 0.0:
        return 0.0
    return -0.5 * u_dot * math.log((1.0 + u) / (1.0 - u))


def dephasing_bloch_rate(v: BlochVector, gamma_rate: float):
    """Bloch-vector velocity under ``coherence ~ exp(-Gamma(t))``."""
    return (-gamma_rate * v.v_x, -gamma_rate * v.v_y, 0.0)


def markov_generator(rho: np.ndarray, kappa_prime: float) -> np.ndarray:
    """Right-hand side of the Born-Markov dephasing master equation."""
    sz = SIGMA_Z
    comm1 = (sz @ rho) @ sz - sz @ (sz @ rho)
    comm2 = sz @ (rho @ sz) - (rho @ sz) @ sz
    return 0.5 * kappa_prime * (comm1 + comm2)


# The generator reduces to kappa' (sz rho sz - rho): the coherence picks up
# -2 kappa' per unit time while the populations stay fixed.
MARKOV_EXPONENT_FACTOR = 2.0


def markov_solution(initial: TlsState, kappa_prime: float, t: float) -> TlsState:
    """Closed-form solution of the Markov master equation at time ``t``."""
    if kappa_prime < 0:
        raise DomainError("kappa' must be >= 0")
    if t < 0:
        raise DomainError("t must be >= 0")
    factor = math.exp(-MARKOV_EXPONENT_FACTOR * kappa_prime * t)
    return TlsState(initial.p_e, initial.p_g, initial.coherence * factor)


def state_entropy(state: TlsState) -> float:
    return entropy_tls(min(bloch(state).u, 1.0))
