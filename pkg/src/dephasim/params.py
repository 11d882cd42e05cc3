"""Parameter types, validation and JSON config ingestion.

Units are hbar = k_B = 1. Frequencies, temperatures and inverse times all
share one unit; the dimensionless time is ``tau = omega_c * t``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .errors import ValidationError

TWO_PI = 2.0 * math.pi

# Documented config keys. Anything else is rejected.
REQUIRED_KEYS = ("lambda", "omega_c", "temperature")
DEFAULTS = {
    "r": 0.0,
    "delta_theta": 0.0,
    "p_e": 0.5,
    "coherence_re": 0.5,
    "coherence_im": 0.0,
    "omega_0": 0.0,
    "phi_k": 0.0,
}
MODE_KEYS = ("omega_k", "g_abs")
KNOWN_KEYS = frozenset(REQUIRED_KEYS) | frozenset(DEFAULTS) | frozenset(MODE_KEYS)


def normalize_angle(angle: float) -> float:
    """Map ``angle`` onto [0, 2*pi)."""
    out = math.fmod(angle, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    if out >= TWO_PI:
        out = 0.0
    return out


@dataclass(frozen=True)
class BathSpectrum:
    """Ohmic spectral density ``J(w) = lambda * w * exp(-w / omega_c)`` at temperature T."""

    lam: float
    omega_c: float
    temperature: float

    def __post_init__(self):
        _nonneg("lambda", self.lam)
        if not self.omega_c > 0.0:
            raise ValidationError("omega_c must be > 0", "omega_c")
        _nonneg("temperature", self.temperature)

    def density(self, omega):
        import numpy as np

        omega = np.asarray(omega, dtype=float)
        return self.lam * omega * np.exp(-omega / self.omega_c)

    def tau(self, t):
        return self.omega_c * t


@dataclass(frozen=True)
class SqueezeParams:
    r: float = 0.0
    delta_theta: float = 0.0

    def __post_init__(self):
        _nonneg("r", self.r)
        object.__setattr__(self, "delta_theta", normalize_angle(_finite("delta_theta", self.delta_theta)))


@dataclass(frozen=True)
class TlsState:
    """Two-level state: populations and the coherence ``rho_eg = <e|rho|g>``."""

    p_e: float
    p_g: float
    coherence: complex

    def __post_init__(self):
        for name in ("p_e", "p_g"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]", name)
        if abs(self.p_e + self.p_g - 1.0) > 1e-12:
            raise ValidationError("p_e + p_g must equal 1", "p_e")
        coh = complex(self.coherence)
        object.__setattr__(self, "coherence", coh)
        if abs(coh) ** 2 > self.p_e * self.p_g * (1.0 + 1e-12) + 1e-15:
            raise ValidationError("coherence exceeds positivity bound |rho_eg|^2 <= p_e p_g", "coherence")

    @classmethod
    def from_excited(cls, p_e: float, coherence: complex = 0.0) -> "TlsState":
        return cls(p_e, 1.0 - p_e, coherence)

    def matrix(self):
        import numpy as np

        c = self.coherence
        return np.array([[self.p_e, c], [c.conjugate(), self.p_g]], dtype=complex)


@dataclass(frozen=True)
class TlsParams:
    # Drops out of the interaction-picture dynamics.
    omega_0: float = 0.0

    def __post_init__(self):
        _nonneg("omega_0", self.omega_0)


@dataclass(frozen=True)
class ModeParams:
    """A single bath mode with coupling ``g = g_abs * exp(i phi_k)``."""

    omega_k: float
    g_abs: float
    phi_k: float = 0.0
    r_k: float = 0.0
    theta_k: float = 0.0

    def __post_init__(self):
        if not self.omega_k > 0.0:
            raise ValidationError("omega_k must be > 0", "omega_k")
        _nonneg("g_abs", self.g_abs)
        _nonneg("r_k", self.r_k)
        _finite("phi_k", self.phi_k)
        _finite("theta_k", self.theta_k)

    @property
    def mu(self) -> complex:
        return self.g_abs / self.omega_k * complex(math.cos(self.phi_k), math.sin(self.phi_k))

    @property
    def delta_theta(self) -> float:
        return normalize_angle(self.theta_k - 2.0 * self.phi_k)

    @property
    def xi(self) -> complex:
        return self.r_k * complex(math.cos(self.theta_k), math.sin(self.theta_k))

    def alpha(self, t: float) -> complex:
        """Displacement ``mu * (1 - exp(i omega_k t))`` of the excited branch."""
        w = self.omega_k * t
        return self.mu * complex(1.0 - math.cos(w), -math.sin(w))

    @classmethod
    def from_squeeze(cls, omega_k, g_abs, phi_k, squeeze: SqueezeParams) -> "ModeParams":
        # theta_k chosen so that theta_k - 2 phi_k equals the global delta_theta
        return cls(omega_k, g_abs, phi_k, squeeze.r, squeeze.delta_theta + 2.0 * phi_k)


@dataclass(frozen=True)
class ParameterBundle:
    spectrum: BathSpectrum
    squeeze: SqueezeParams
    state: TlsState
    tls: TlsParams = field(default_factory=TlsParams)
    mode: Optional[ModeParams] = None

    def to_config(self) -> dict:
        """Inverse of :func:`validate`: the flat config dict."""
        cfg = {
            "lambda": self.spectrum.lam,
            "omega_c": self.spectrum.omega_c,
            "temperature": self.spectrum.temperature,
            "r": self.squeeze.r,
            "delta_theta": self.squeeze.delta_theta,
            "p_e": self.state.p_e,
            "coherence_re": self.state.coherence.real,
            "coherence_im": self.state.coherence.imag,
            "omega_0": self.tls.omega_0,
        }
        if self.mode is not None:
            cfg.update(omega_k=self.mode.omega_k, g_abs=self.mode.g_abs, phi_k=self.mode.phi_k)
        return cfg


def _finite(name, value) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"{name} must be a real number", name)
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number", name) from None
    if not math.isfinite(x):
        raise ValidationError(f"{name} must be finite", name)
    return x


def _nonneg(name, value) -> float:
    x = _finite(name, value)
    if x < 0.0:
        raise ValidationError(f"{name} must be >= 0", name)
    return x


def validate(config: Any) -> ParameterBundle:
    """Validate a raw parameter mapping (or an existing bundle) into a bundle.

    Raises :class:`ValidationError` naming the first offending field.
    """
    if isinstance(config, ParameterBundle):
        config = config.to_config()
    if not isinstance(config, Mapping):
        raise ValidationError("config must be a mapping")
    unknown = sorted(set(config) - KNOWN_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}", unknown[0])
    missing = [k for k in REQUIRED_KEYS if k not in config]
    if missing:
        raise ValidationError(f"missing required key: {missing[0]}", missing[0])

    raw = dict(DEFAULTS)
    raw.update(config)
    vals = {k: _finite(k, v) for k, v in raw.items()}

    for name in ("lambda", "temperature", "r"):
        _nonneg(name, vals[name])
    if not 0.0 <= vals["p_e"] <= 1.0:
        raise ValidationError("p_e must lie in [0, 1]", "p_e")

    spectrum = BathSpectrum(vals["lambda"], vals["omega_c"], vals["temperature"])
    squeeze = SqueezeParams(vals["r"], vals["delta_theta"])
    state = TlsState.from_excited(vals["p_e"], complex(vals["coherence_re"], vals["coherence_im"]))
    tls = TlsParams(vals["omega_0"])

    mode = None
    present = [k for k in MODE_KEYS if k in config]
    if present:
        if len(present) != len(MODE_KEYS):
            absent = next(k for k in MODE_KEYS if k not in config)
            raise ValidationError(f"mode parameters need both omega_k and g_abs; missing {absent}", absent)
        mode = ModeParams.from_squeeze(vals["omega_k"], vals["g_abs"], vals["phi_k"], squeeze)
    return ParameterBundle(spectrum, squeeze, state, tls, mode)


def load_config(path) -> ParameterBundle:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be a JSON object")
    return validate(data)
