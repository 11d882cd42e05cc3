"""Adaptive Gauss-Kronrod quadrature and the two frequency integrals it checks.

The integrals are the decay factor

    Gamma(t) = int_0^inf dw/2pi 4 J(w) coth(w/2T) (1 - cos wt)/w^2
               [cosh 2r - sinh 2r cos(wt - dtheta)]

and the semi-Born bath entropy rate

    dS_B/dt = (2/T) int_0^inf dw/2pi J(w) {cosh 2r sin wt
               - sinh 2r [sin(2wt - dtheta) - sin(wt - dtheta)]}

for the Ohmic ``J(w) = lambda w exp(-w/omega_c)``. Neither integrand uses
the closed forms in :mod:`dephasim.decay` or :mod:`dephasim.bath`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, DomainError
from .params import BathSpectrum, SqueezeParams

# 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_W = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (1, 3, 5, 7 from the end)
GAUSS_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12
MAX_PANELS = 400_000
# Tail truncation in units of omega_c: exp(-50) ~ 2e-22.
OMEGA_MAX_FACTOR = 50.0
# Below this frequency (units of omega_c) the integrand is replaced by its limit.
SMALL_OMEGA = 1e-6


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int


def _panel_rules(f, left, width):
    half = 0.5 * width
    mid = left + half
    x = mid[:, None] + half[:, None] * NODES[None, :]
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    kron = half * (y @ KRONROD_W)
    gauss = half * (y @ GAUSS_W)
    return kron, np.abs(kron - gauss)


def integrate_adaptive(f: Callable, a: float, b: float, rel_tol: float = DEFAULT_REL_TOL,
                       abs_tol: float = DEFAULT_ABS_TOL, max_width: float | None = None,
                       max_panels: int = MAX_PANELS) -> QuadResult:
    """Integrate a vectorised ``f`` over [a, b] by bisecting G7/K15 panels.

    ``f`` receives an ndarray of abscissae and must return values of the
    same shape. ``max_width`` caps the initial panel width, which keeps the
    error estimate honest for oscillatory integrands.
    """
    if not b > a:
        raise DomainError("integration needs a < b")
    span = b - a
    n0 = 1
    if max_width is not None and max_width > 0:
        n0 = max(1, int(math.ceil(span / max_width)))
    edges = np.linspace(a, b, n0 + 1)
    left, width = edges[:-1], np.diff(edges)

    done_val = 0.0
    done_err = 0.0
    evals = 0
    while True:
        val, err = _panel_rules(f, left, width)
        evals += 15 * left.size
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(err))):
            raise DomainError("integrand is not finite on the integration interval")
        total = done_val + val.sum()
        total_err = done_err + err.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        if total_err <= tol:
            return QuadResult(float(total), float(total_err), evals)

        # panels whose error exceeds their width-proportional share get bisected
        share = tol * width / span
        bad = err > share
        if not bad.any():
            bad = err >= err.max()
        done_val += val[~bad].sum()
        done_err += err[~bad].sum()
        n_active = 2 * int(bad.sum())
        if done_err > tol or evals + 15 * n_active > 15 * max_panels:
            raise AccuracyError(
                f"quadrature tolerance {tol:.3g} not reached (error estimate {total_err:.3g})",
                estimate=float(total), error=float(total_err))
        lb, wb = left[bad], 0.5 * width[bad]
        left = np.concatenate([lb, lb + wb])
        width = np.concatenate([wb, wb])


COTH_MODES = ("unity", "high_t", "exact")


def _thermal_weight(omega, temperature, mode):
    """coth(w/2T) in the requested approximation, multiplied by w."""
    if mode == "unity" or (mode == "exact" and temperature == 0.0):
        return omega
    if mode == "high_t":
        return np.full_like(omega, 2.0 * temperature)
    if mode == "exact":
        x = omega / (2.0 * temperature)
        return omega / np.tanh(x)
    raise DomainError(f"unknown coth_mode {mode!r}; expected one of {COTH_MODES}")


def _omega_max(spectrum):
    return OMEGA_MAX_FACTOR * spectrum.omega_c


def gamma_integrand(t, spectrum: BathSpectrum, squeeze: SqueezeParams, coth_mode: str):
    lam, wc, T = spectrum.lam, spectrum.omega_c, spectrum.temperature
    ch, sh = math.cosh(2 * squeeze.r), math.sinh(2 * squeeze.r)
    dth = squeeze.delta_theta
    if coth_mode in ("high_t",) and not T > 0:
        raise DomainError("coth_mode high_t needs T > 0")
    eps = SMALL_OMEGA * wc

    def f(w):
        w = np.asarray(w, dtype=float)
        small = w < eps
        ws = np.where(small, eps, w)
        # (1 - cos wt) / w^2 written as 2 sin^2(wt/2) / w^2 to avoid cancellation
        kernel = 2.0 * np.sin(0.5 * ws * t) ** 2 / (ws * ws)
        out = (2.0 * lam / math.pi) * np.exp(-ws / wc) * _thermal_weight(ws, T, coth_mode) * kernel
        out = out * (ch - sh * np.cos(ws * t - dth))
        if small.any():
            # w -> 0 limit: kernel -> t^2/2, weight -> its value at 0
            w0 = 0.0 if coth_mode == "unity" or (coth_mode == "exact" and T == 0) else 2.0 * T
            lim = (2.0 * lam / math.pi) * w0 * 0.5 * t * t * (ch - sh * math.cos(dth))
            out = np.where(small, lim, out)
        return out

    return f


def gamma_quadrature(t, spectrum: BathSpectrum, squeeze: SqueezeParams, coth_mode: str = "exact",
                     rel_tol: float = DEFAULT_REL_TOL, abs_tol: float = DEFAULT_ABS_TOL,
                     full_output: bool = False):
    """Numerical decay factor Gamma(t) by direct frequency integration."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if coth_mode not in COTH_MODES:
        raise DomainError(f"unknown coth_mode {coth_mode!r}; expected one of {COTH_MODES}")
    if t == 0:
        res = QuadResult(0.0, 0.0, 1)
    else:
        f = gamma_integrand(t, spectrum, squeeze, coth_mode)
        res = integrate_adaptive(f, 0.0, _omega_max(spectrum), rel_tol, abs_tol,
                                 max_width=math.pi / (4.0 * 2.0 * t))
    return res if full_output else res.value


def bath_entropy_integrand(t, spectrum: BathSpectrum, squeeze: SqueezeParams):
    lam, wc, T = spectrum.lam, spectrum.omega_c, spectrum.temperature
    ch, sh = math.cosh(2 * squeeze.r), math.sinh(2 * squeeze.r)
    dth = squeeze.delta_theta

    def f(w):
        w = np.asarray(w, dtype=float)
        osc = ch * np.sin(w * t) - sh * (np.sin(2 * w * t - dth) - np.sin(w * t - dth))
        return (lam / (math.pi * T)) * w * np.exp(-w / wc) * osc

    return f


def bath_entropy_quadrature(t, spectrum: BathSpectrum, squeeze: SqueezeParams,
                            rel_tol: float = DEFAULT_REL_TOL, abs_tol: float = DEFAULT_ABS_TOL,
                            full_output: bool = False):
    """Numerical semi-Born bath entropy rate at time t."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if not spectrum.temperature > 0:
        raise DomainError("bath entropy rate needs T > 0")
    if t == 0:
        res = QuadResult(0.0, 0.0, 1)
    else:
        f = bath_entropy_integrand(t, spectrum, squeeze)
        res = integrate_adaptive(f, 0.0, _omega_max(spectrum), rel_tol, abs_tol,
                                 max_width=math.pi / (4.0 * 2.0 * t))
    return res if full_output else res.value
