"""Closed-form resonator responses and Fano-background algebra.

Frequencies are in Hz throughout. Every relation used here depends on
frequency only through ratios, so the angular form and the ordinary form
give identical results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import DegenerateNormalizationError, InvalidInputError, ModeError

INF = math.inf

#: Effective propagation speed in a PTFE coaxial cable (about 0.7 c).
C_EFF_DEFAULT = 0.7 * SPEED_OF_LIGHT


class MeasurementMode(str, enum.Enum):
    REFLECTION = "reflection"
    NOTCH_TRANSMISSION = "transmission"

    @classmethod
    def parse(cls, value: "str | MeasurementMode") -> "MeasurementMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"reflection": cls.REFLECTION, "s11": cls.REFLECTION,
                   "transmission": cls.NOTCH_TRANSMISSION, "notch": cls.NOTCH_TRANSMISSION,
                   "hanger": cls.NOTCH_TRANSMISSION, "s21": cls.NOTCH_TRANSMISSION}
        try:
            return aliases[key]
        except KeyError:
            raise InvalidInputError(f"unknown measurement mode {value!r}") from None

    @property
    def radius_scale(self) -> float:
        """Ratio between circle radius and Q_l/Q_c (1 for reflection, 1/2 for notch)."""
        return 1.0 if self is MeasurementMode.REFLECTION else 0.5


@dataclass(frozen=True)
class ResonatorParams:
    f_r: float
    q_i: float
    q_c: float
    mode: MeasurementMode = MeasurementMode.REFLECTION

    def __post_init__(self):
        object.__setattr__(self, "mode", MeasurementMode.parse(self.mode))
        if not (math.isfinite(self.f_r) and self.f_r > 0):
            raise InvalidInputError(f"f_r must be finite and positive, got {self.f_r!r}")
        if not (self.q_c > 0 and math.isfinite(self.q_c)):
            raise InvalidInputError(f"q_c must be finite and positive, got {self.q_c!r}")
        if not self.q_i > 0:
            raise InvalidInputError(f"q_i must be positive or inf, got {self.q_i!r}")

    @property
    def q_l(self) -> float:
        return loaded_q(self.q_i, self.q_c)

    @property
    def kappa(self) -> float:
        """Linewidth in Hz (the kappa/2pi of the usual angular notation)."""
        return kappa(self.f_r, self.q_l)

    @property
    def kappa_rad(self) -> float:
        return 2 * math.pi * self.kappa

    @property
    def coupling(self) -> float:
        """Q_i/Q_c."""
        return self.q_i / self.q_c

    @property
    def radius(self) -> float:
        return coupling_to_radius(self.coupling, self.mode)


@dataclass(frozen=True)
class FanoBackground:
    """Single leakage phasor b*exp(i*phi).

    With ``path_length_m`` set the phase advances linearly with frequency
    offset, see :func:`background_phase`.
    """

    b: float = 0.0
    phi: float = 0.0
    path_length_m: float | None = None
    eps_r: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.b < 1.0):
            raise InvalidInputError(f"leakage amplitude must lie in [0, 1), got {self.b!r}")
        if not math.isfinite(self.phi):
            raise InvalidInputError("phi must be finite")
        if self.path_length_m is not None and not self.path_length_m >= 0:
            raise InvalidInputError("path length must be >= 0")

    @property
    def b_tilde(self) -> float:
        return self.b / (1.0 - self.b)

    def phase_at(self, delta_f):
        if self.path_length_m is None:
            return self.phi + np.zeros_like(np.asarray(delta_f, dtype=float))
        return self.phi + background_phase(self.path_length_m, delta_f, eps_r=self.eps_r)


def _check_freq(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("frequency must be finite")
    return f


def _lorentz(params: ResonatorParams, f):
    q_l = params.q_l
    return 1.0 / (1.0 + 2j * q_l * (f - params.f_r) / params.f_r)


def reflection_response(params: ResonatorParams, f):
    """S11 = 1 - (2 Q_l/Q_c) / (1 + 2i Q_l (f - f_r)/f_r)."""
    f = _check_freq(f)
    out = np.asarray(1.0 - (2.0 * params.q_l / params.q_c) * _lorentz(params, f))
    return out[()] if out.ndim == 0 else out


def transmission_response(params: ResonatorParams, f):
    """Notch-type S21 = 1 - (Q_l/Q_c) / (1 + 2i Q_l (f - f_r)/f_r)."""
    if params.mode is not MeasurementMode.NOTCH_TRANSMISSION:
        raise ModeError("transmission_response needs mode=NOTCH_TRANSMISSION")
    f = _check_freq(f)
    out = np.asarray(1.0 - (params.q_l / params.q_c) * _lorentz(params, f))
    return out[()] if out.ndim == 0 else out


def response(params: ResonatorParams, f):
    """Dispatch on ``params.mode``."""
    if params.mode is MeasurementMode.REFLECTION:
        return reflection_response(params, f)
    return transmission_response(params, f)


def apply_fano(signal, bg: FanoBackground):
    """Measured signal (1-b) S + b exp(i phi) for a constant phase."""
    return (1.0 - bg.b) * np.asarray(signal) + bg.b * np.exp(1j * bg.phi)


def normalize_fano(signal, bg: FanoBackground):
    """Fano-distorted signal after division by the measured off-resonant point.

    This is the Moebius map S -> (S + c)/(1 + c) with c = b/(1-b) exp(i phi);
    S = 1 is a fixed point.
    """
    c = bg.b_tilde * np.exp(1j * bg.phi)
    den = 1.0 + c
    if abs(den) < 1e-12:
        raise DegenerateNormalizationError(
            "off-resonant point vanishes (b = 0.5, phi = pi); normalization undefined")
    return (np.asarray(signal) + c) / den


def background_phase(path_length, delta_f, *, c_eff: float | None = None,
                     eps_r: float | None = None):
    """Interference phase 2pi * 2 l df / c_eff accumulated over a frequency offset.

    ``c_eff`` defaults to 0.7 c. Passing ``eps_r`` instead uses c/sqrt(eps_r).
    """
    if not path_length >= 0:
        raise InvalidInputError("path length must be >= 0")
    if c_eff is None:
        c_eff = SPEED_OF_LIGHT / math.sqrt(eps_r) if eps_r is not None else C_EFF_DEFAULT
    return 2 * math.pi * 2.0 * path_length * np.asarray(delta_f, dtype=float) / c_eff


def background_period(path_length, *, c_eff: float | None = None,
                      eps_r: float | None = None) -> float:
    """Frequency interval over which the background phase advances by 2pi."""
    if path_length <= 0:
        return INF
    return float(2 * math.pi / background_phase(path_length, 1.0, c_eff=c_eff, eps_r=eps_r))


def coupling_to_radius(coupling, mode: MeasurementMode = MeasurementMode.REFLECTION):
    """Circle radius for a coupling coefficient Q_i/Q_c (inf allowed)."""
    mode = MeasurementMode.parse(mode)
    k = np.asarray(coupling, dtype=float)
    if np.any(np.isnan(k)) or np.any(k < 0):
        raise InvalidInputError("coupling must be >= 0")
    with np.errstate(invalid="ignore"):
        r = np.where(np.isinf(k), 1.0, k / (k + 1.0))
    r = r * mode.radius_scale
    return float(r) if r.ndim == 0 else r


def radius_to_coupling(radius, mode: MeasurementMode = MeasurementMode.REFLECTION):
    """Inverse of :func:`coupling_to_radius`; unphysical radii map to inf."""
    mode = MeasurementMode.parse(mode)
    r = np.asarray(radius, dtype=float) / mode.radius_scale
    if np.any(np.isnan(r)) or np.any(r < 0):
        raise InvalidInputError("radius must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(r >= 1.0, INF, r / (1.0 - r))
    return float(k) if k.ndim == 0 else k


def loaded_q(q_i, q_c):
    """Harmonic combination 1/Q_l = 1/Q_c + 1/Q_i."""
    if q_i == INF:
        return float(q_c)
    return 1.0 / (1.0 / q_c + 1.0 / q_i)


def kappa(f_r, q_l):
    return f_r / q_l


def leakage_db_to_linear(isolation_db: float) -> float:
    """Amplitude b from a power isolation b**2 given in dB."""
    if not math.isfinite(isolation_db) or isolation_db > 0:
        raise InvalidInputError(f"isolation must be <= 0 dB, got {isolation_db!r}")
    return 10.0 ** (isolation_db / 20.0)


def leakage_linear_to_db(b: float) -> float:
    if b <= 0:
        return -INF
    return 20.0 * math.log10(b)


def quality_from_radius(radius, q_l, mode: MeasurementMode = MeasurementMode.REFLECTION):
    """(Q_i, Q_c) for a circle radius at fixed loaded Q.

    Radii at or beyond the physical limit give Q_i = inf and Q_c = Q_l.
    """
    mode = MeasurementMode.parse(mode)
    r = float(radius) / mode.radius_scale
    if not r >= 0:
        raise InvalidInputError("radius must be >= 0")
    if r >= 1.0:
        return INF, float(q_l)
    q_c = INF if r == 0 else q_l / r
    return q_l / (1.0 - r), q_c
