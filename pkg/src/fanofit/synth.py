"""Synthetic resonator traces, lineshapes and centerpoint trajectories.

The forward chain is resonator response -> Fano background -> line gain and
cable delay -> additive complex Gaussian noise. Everything is deterministic
for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circlefit import MIN_SAMPLES, Trace
from .errors import InvalidInputError
from .model import (
    FanoBackground,
    MeasurementMode,
    ResonatorParams,
    background_phase,
    response,
)


def default_span(params: ResonatorParams, n_kappa: float = 10.0, n_points: int = 801):
    """+-``n_kappa`` linewidths around f_r."""
    half = n_kappa * params.kappa
    return (params.f_r - half, params.f_r + half, n_points)


@dataclass(frozen=True)
class SynthSpec:
    params: ResonatorParams
    bg: FanoBackground = field(default_factory=FanoBackground)
    gain: complex = 1.0 + 0j
    delay: float = 0.0
    span: tuple | None = None
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.span is None:
            object.__setattr__(self, "span", default_span(self.params))
        f_start, f_stop, n = self.span
        if not f_start < f_stop:
            raise InvalidInputError("span must satisfy f_start < f_stop")
        if int(n) != n or n < MIN_SAMPLES:
            raise InvalidInputError(f"span needs an integer number of points >= {MIN_SAMPLES}")
        if not self.noise_sigma >= 0:
            raise InvalidInputError("noise_sigma must be >= 0")
        if not (math.isfinite(self.delay) and np.isfinite(self.gain) and self.gain != 0):
            raise InvalidInputError("gain must be finite and non-zero, delay finite")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")

    @property
    def freqs(self) -> np.ndarray:
        f_start, f_stop, n = self.span
        return np.linspace(f_start, f_stop, int(n))

    def truth(self) -> dict:
        p, bg = self.params, self.bg
        return {
            "f_r_hz": p.f_r, "q_i": "inf" if math.isinf(p.q_i) else p.q_i, "q_c": p.q_c,
            "q_l": p.q_l, "kappa_hz": p.kappa, "mode": p.mode.value,
            "b": bg.b, "phi": bg.phi, "path_length_m": bg.path_length_m,
            "gain": {"re": complex(self.gain).real, "im": complex(self.gain).imag},
            "delay_s": self.delay, "span": list(self.span),
            "noise_sigma": self.noise_sigma, "seed": int(self.seed),
        }


def synth_trace(spec: SynthSpec) -> Trace:
    f = spec.freqs
    s = response(spec.params, f)
    phi = spec.bg.phase_at(f - f[0])
    b = spec.bg.b
    z = spec.gain * np.exp(-2j * np.pi * f * spec.delay) * ((1 - b) * s + b * np.exp(1j * phi))
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(int(spec.seed))
        scale = spec.noise_sigma * abs(spec.gain)
        z = z + scale * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
    return Trace(f, z, {"source": "synth", "seed": int(spec.seed)})


@dataclass
class Lineshape:
    phi: float
    detuning: np.ndarray  # (f - f_r) / kappa
    amplitude: np.ndarray


GALLERY_PHIS = (0.0, 0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi, math.pi)


def synth_lineshape_gallery(b: float, phis=GALLERY_PHIS, *, n_points: int = 1001,
                            half_span: float = 5.0, f_r: float = 5e9,
                            q_c: float = 1e4) -> list[Lineshape]:
    """Normalized |S'| of a lossless reflection resonator for several phases.

    The detuning grid is symmetric and always contains f = f_r.
    """
    if n_points % 2 == 0:
        n_points += 1
    params = ResonatorParams(f_r, math.inf, q_c, MeasurementMode.REFLECTION)
    x = np.linspace(-half_span, half_span, n_points)
    f = f_r + x * params.kappa
    s = response(params, f)
    FanoBackground(b)  # validates b
    out = []
    for phi in phis:
        measured = (1 - b) * s + b * np.exp(1j * phi)
        baseline = abs((1 - b) + b * np.exp(1j * phi))
        out.append(Lineshape(float(phi), x, np.abs(measured) / baseline))
    return out


def synth_background_pattern(b: float, path_length: float, f_span, *, phi0: float = 0.0,
                             eps_r: float | None = None):
    """Off-resonant |S| = |(1-b) + b exp(i phi(f))| over a frequency grid.

    ``f_span`` is ``(f_start, f_stop, n)`` or an array of frequencies.
    Returns ``(freqs, amplitude)``.
    """
    if isinstance(f_span, tuple):
        f = np.linspace(f_span[0], f_span[1], int(f_span[2]))
    else:
        f = np.asarray(f_span, dtype=float)
    FanoBackground(b, phi0)  # validates b
    phi = phi0 + background_phase(path_length, f - f[0], eps_r=eps_r)
    return f, np.abs((1 - b) + b * np.exp(1j * phi))


def fano_center(x: float, b: float, phi):
    """Image M' of a real centerpoint x under the normalized Fano transform."""
    c = b / (1 - b) * np.exp(1j * np.asarray(phi, dtype=float))
    return (x + c) / (1 + c)


def synth_trajectory(x: float, b: float, phis=None, *, path_length: float | None = None,
                     resonance_freqs=None, phi0: float = 0.0, q_l: float = 1e4,
                     noise_sigma: float = 0.0, seed: int = 0):
    """Centerpoints M'(phi) of a fixed resonator seen through a rotating leakage phasor.

    Either give the phases directly or a path length plus the sequence of
    resonance frequencies; labels are the phases or the frequencies.
    """
    from .trajectory import CenterTrajectory

    if not 0 <= b < 0.5:
        raise InvalidInputError("trajectory needs 0 <= b < 0.5")
    if phis is not None:
        phis = np.asarray(phis, dtype=float)
        labels = phis
    else:
        if path_length is None or resonance_freqs is None:
            raise InvalidInputError("give phis or (path_length, resonance_freqs)")
        labels = np.asarray(resonance_freqs, dtype=float)
        phis = phi0 + background_phase(path_length, labels - labels[0])
    m = fano_center(x, b, phis)
    if noise_sigma > 0:
        rng = np.random.default_rng(int(seed))
        m = m + noise_sigma * (rng.standard_normal(m.size) + 1j * rng.standard_normal(m.size))
    return CenterTrajectory(labels, m, np.full(m.size, float(q_l)))
