"""Closed-form decoherence factor for the Ohmic squeezed thermal bath.

The decay factor is

    Gamma(t) = (lambda / pi) * [A cosh 2r - sinh 2r (B cos dtheta + C sin dtheta)]

with coefficients (A, B, C) that depend on the temperature regime. All
coefficient functions take the dimensionless time ``tau = omega_c * t`` and
accept scalars or numpy arrays.

Note on the phase dependence of ``kappa``: the formula implemented here
subtracts ``(ln 4 / pi) sinh 2r sin dtheta``, so the rate is *smallest* at
``dtheta = pi/2`` and largest at ``3 pi / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError
from .params import BathSpectrum, SqueezeParams

LN4_OVER_PI = math.log(4.0) / math.pi
REGIMES = ("zero_t", "high_t", "exact")


class DecayCoefficients(NamedTuple):
    a: np.ndarray | float
    b: np.ndarray | float
    c: np.ndarray | float


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for the thermal series in :func:`coeffs_exact`."""

    rel_tol: float = 1e-10
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be > 0")
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")


def _tau(tau):
    arr = np.asarray(tau, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise DomainError("tau must be finite and >= 0")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def coeffs_zero_t(tau) -> DecayCoefficients:
    t = _tau(tau)
    t2 = t * t
    a = np.log1p(t2)
    b = 0.5 * np.log1p(4.0 * t2) - np.log1p(t2)
    c = 2.0 * np.arctan(t) - np.arctan(2.0 * t)
    return DecayCoefficients(_out(a), _out(b), _out(c))


def coeffs_zero_t_deriv(tau) -> DecayCoefficients:
    """d/dtau of :func:`coeffs_zero_t`."""
    t = _tau(tau)
    t2 = t * t
    da = 2.0 * t / (1.0 + t2)
    db = 4.0 * t / (1.0 + 4.0 * t2) - 2.0 * t / (1.0 + t2)
    dc = 2.0 / (1.0 + t2) - 2.0 / (1.0 + 4.0 * t2)
    return DecayCoefficients(_out(da), _out(db), _out(dc))


def monotonicity_margin(tau):
    """Lower bound of ``dGamma/dtau * pi / (lambda cosh 2r)``; never negative.

    Evaluated in the factored form, which avoids cancellation at small tau.
    """
    t = _tau(tau)
    t2 = t * t
    ratio = (1.0 + t2) / (1.0 + 4.0 * t2)
    # 1 - sqrt(q) == (1 - q) / (1 + sqrt(q))
    return _out(2.0 * t / (1.0 + t2) * (1.0 - ratio) / (1.0 + np.sqrt(ratio)))


def _check_temp_ratio(temp_ratio):
    if not temp_ratio > 0:
        raise DomainError("temperature must be > 0 for the high-temperature coefficients")


def coeffs_high_t(tau, temp_ratio: float) -> DecayCoefficients:
    """High-temperature coefficients; ``temp_ratio`` is T / omega_c."""
    _check_temp_ratio(temp_ratio)
    t = _tau(tau)
    t2 = t * t
    pre = 2.0 * temp_ratio
    at1, at2 = np.arctan(t), np.arctan(2.0 * t)
    a = pre * (2.0 * t * at1 - np.log1p(t2))
    b = pre * (2.0 * t * (at2 - at1) - (0.5 * np.log1p(4.0 * t2) - np.log1p(t2)))
    c = pre * ((at2 - 2.0 * at1) + t * (np.log1p(4.0 * t2) - np.log1p(t2)))
    return DecayCoefficients(_out(a), _out(b), _out(c))


def coeffs_high_t_deriv(tau, temp_ratio: float) -> DecayCoefficients:
    _check_temp_ratio(temp_ratio)
    t = _tau(tau)
    pre = 2.0 * temp_ratio
    at1, at2 = np.arctan(t), np.arctan(2.0 * t)
    return DecayCoefficients(
        _out(pre * 2.0 * at1),
        _out(pre * 2.0 * (at2 - at1)),
        _out(pre * (np.log1p(4.0 * t * t) - np.log1p(t * t))),
    )


# Thermal series.
#
# coth(w / 2T) = 1 + 2 sum_n exp(-n w / T). Each n >= 1 term turns the
# zero-temperature integral into the same integral with the cutoff
# omega_c -> omega_c / (1 + n omega_c / T). With s = T t and u = T/omega_c + n
# the n-th term is the zero-temperature coefficient evaluated at s / u.
# The remainder sum_{n > N} is approximated by the integral over
# u in [U_N + 1/2, inf) of the same function, which has a closed form.

def _zero_t_terms(x):
    x2 = x * x
    return (
        np.log1p(x2),
        0.5 * np.log1p(4.0 * x2) - np.log1p(x2),
        2.0 * np.arctan(x) - np.arctan(2.0 * x),
    )


def _tail_integrals(s, u):
    """Integrals over [u, inf) of the zero-T coefficients at argument s/u."""
    x = s / u
    x2 = x * x
    # arctan(u/s) rewritten as pi/2 - arctan(s/u) keeps precision when u >> s
    ia = 2.0 * s * math.atan(x) - u * math.log1p(x2)
    # int 0.5 ln(1 + 4 s^2/u^2) - ln(1 + s^2/u^2) du, the constant terms cancel
    ib = -(0.5 * u * math.log1p(4.0 * x2) - 2.0 * s * math.atan(2.0 * x)
           - u * math.log1p(x2) + 2.0 * s * math.atan(x))
    ic = -(2.0 * u * math.atan(x) - u * math.atan(2.0 * x)
           + s * (math.log1p(x2) - math.log1p(4.0 * x2)))
    return ia, ib, ic


class SeriesResult(NamedTuple):
    coeffs: DecayCoefficients
    terms: int
    remainder: tuple


def _series_scalar(tau: float, temp_ratio: float, ctrl: SeriesControl) -> SeriesResult:
    a0, b0, c0 = (float(v) for v in _zero_t_terms(tau))
    s = temp_ratio * tau
    if s == 0.0:
        return SeriesResult(DecayCoefficients(a0, b0, c0), 0, (0.0, 0.0, 0.0))

    sums = np.zeros(3)
    n_done = 0
    chunk = 64
    last = np.zeros(3)
    while n_done < ctrl.max_terms:
        n = np.arange(n_done + 1, min(n_done + chunk, ctrl.max_terms) + 1, dtype=float)
        terms = np.array(_zero_t_terms(s / (temp_ratio + n)))
        sums += terms.sum(axis=1)
        last = terms[:, -1]
        n_done = int(n[-1])
        chunk = min(2 * chunk, 4096)

        u_half = temp_ratio + n_done + 0.5
        tail = np.array(_tail_integrals(s, u_half))
        # midpoint-rule error of the tail is ~ f'/24; f' is bounded by the last term change
        nxt = np.array(_zero_t_terms(s / (u_half + 0.5)))
        err = np.abs(last - nxt) / 24.0
        total = np.array([a0, b0, c0]) + 2.0 * (sums + tail)
        scale = max(np.max(np.abs(total)), 1e-300)
        if np.max(err) * 2.0 <= ctrl.rel_tol * scale:
            return SeriesResult(DecayCoefficients(*(float(v) for v in total)), n_done, tuple(2.0 * tail))

    partial = np.array([a0, b0, c0]) + 2.0 * sums
    raise ConvergenceError(
        f"thermal series did not converge within {ctrl.max_terms} terms",
        partial=tuple(partial),
        last_term=float(np.max(np.abs(last))),
    )


def coeffs_exact(tau, spectrum: BathSpectrum, ctrl: SeriesControl | None = None) -> DecayCoefficients:
    """Finite-temperature coefficients from the thermal (coth) series."""
    ctrl = ctrl or SeriesControl()
    if not spectrum.temperature > 0:
        raise DomainError("coeffs_exact needs T > 0; use coeffs_zero_t at T = 0")
    t = _tau(tau)
    ratio = spectrum.temperature / spectrum.omega_c
    flat = np.atleast_1d(t).ravel()
    out = np.empty((3, flat.size))
    for i, ti in enumerate(flat):
        out[:, i] = _series_scalar(float(ti), ratio, ctrl).coeffs
    if np.ndim(t) == 0:
        return DecayCoefficients(*(float(v) for v in out[:, 0]))
    return DecayCoefficients(*(row.reshape(t.shape) for row in out))


def coefficients(tau, spectrum: BathSpectrum, regime: str, ctrl: SeriesControl | None = None):
    if regime == "zero_t":
        return coeffs_zero_t(tau)
    if regime == "high_t":
        return coeffs_high_t(tau, spectrum.temperature / spectrum.omega_c)
    if regime == "exact":
        if spectrum.temperature == 0.0:
            return coeffs_zero_t(tau)
        return coeffs_exact(tau, spectrum, ctrl)
    raise DomainError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def combine(coeffs, lam: float, squeeze: SqueezeParams):
    """Assemble Gamma (or its derivative) from coefficient triples."""
    a, b, c = coeffs
    ch, sh = math.cosh(2 * squeeze.r), math.sinh(2 * squeeze.r)
    dt = squeeze.delta_theta
    return lam / math.pi * (a * ch - sh * (b * math.cos(dt) + c * math.sin(dt)))


def gamma(t, spectrum: BathSpectrum, squeeze: SqueezeParams, regime: str = "exact",
          ctrl: SeriesControl | None = None):
    """Decay factor Gamma(t); ``t`` in absolute time units."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("t must be >= 0")
    return combine(coefficients(spectrum.tau(tt), spectrum, regime, ctrl), spectrum.lam, squeeze)


def gamma_rate(t, spectrum: BathSpectrum, squeeze: SqueezeParams, regime: str = "exact",
               ctrl: SeriesControl | None = None):
    """dGamma/dt. Analytic for zero_t and high_t, central difference for exact."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("t must be >= 0")
    tau = spectrum.tau(tt)
    if regime == "exact" and spectrum.temperature > 0:
        h = 1e-4 * np.maximum(tau, 1.0)
        lo = np.maximum(tau - h, 0.0)
        hi = tau + h
        up = combine(coeffs_exact(hi, spectrum, ctrl), spectrum.lam, squeeze)
        dn = combine(coeffs_exact(lo, spectrum, ctrl), spectrum.lam, squeeze)
        return spectrum.omega_c * (up - dn) / (hi - lo)
    if regime == "high_t":
        d = coeffs_high_t_deriv(tau, spectrum.temperature / spectrum.omega_c)
    elif regime in ("zero_t", "exact"):
        d = coeffs_zero_t_deriv(tau)
    else:
        raise DomainError(f"unknown regime {regime!r}")
    return spectrum.omega_c * combine(d, spectrum.lam, squeeze)


def _positive_t(spectrum):
    if not spectrum.temperature > 0:
        raise DomainError("dephasing rates need T > 0")


def kappa_exact(spectrum: BathSpectrum, squeeze: SqueezeParams) -> float:
    """Long-time dephasing rate of the exact high-temperature dynamics."""
    _positive_t(spectrum)
    r, dt = squeeze.r, squeeze.delta_theta
    return 2.0 * spectrum.lam * spectrum.temperature * (
        math.cosh(2 * r) - LN4_OVER_PI * math.sinh(2 * r) * math.sin(dt))


def kappa_markov(spectrum: BathSpectrum, squeeze: SqueezeParams) -> float:
    """Born-Markov rate entering the dephasing master equation."""
    _positive_t(spectrum)
    r, dt = squeeze.r, squeeze.delta_theta
    return 2.0 * spectrum.lam * spectrum.temperature * (
        math.cosh(2 * r) - math.sinh(2 * r) * math.cos(dt))
