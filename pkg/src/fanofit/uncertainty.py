"""Systematic uncertainty of Q_i caused by an unknown leakage phase.

Only the leakage amplitude is bounded; the phase is free. Undoing the
normalized Fano transform for every phase moves the centerpoint on a circle
of radius |R'| b~ around M'. The true centerpoint must lie on the real axis,
so the intersections of that circle with the axis bracket the true radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .circlefit import CircleFitResult
from .errors import DegenerateGeometryError, DivergentGeometryError, FeasibilityError, InvalidInputError
from .model import (
    INF,
    MeasurementMode,
    coupling_to_radius,
    leakage_db_to_linear,
    leakage_linear_to_db,
    quality_from_radius,
)

UNBOUNDED_QI = "UNBOUNDED_QI"
INFEASIBLE_BOUND = "INFEASIBLE_BOUND"

DEFAULT_BAND_DB = (-25.0, -20.0, -15.0, -10.0)

# relative slack when deciding whether a bound sits exactly at b_min
_FEAS_RTOL = 1e-12


class Triple(NamedTuple):
    min: float
    mid: float
    max: float

    def as_dict(self) -> dict:
        return {"min": self.min, "mid": self.mid, "max": self.max}


@dataclass
class QiRange:
    q_i: Triple
    q_c: Triple
    r: Triple
    b_assumed: float
    b_min: float
    mode: MeasurementMode = MeasurementMode.REFLECTION
    infeasible: bool = False
    warnings: list = field(default_factory=list)


@dataclass(frozen=True)
class CenterCircle:
    x_c: float
    r_c: float
    beta: float


def _tilde(b: float) -> float:
    if not 0.0 <= b < 1.0:
        raise InvalidInputError(f"leakage amplitude must lie in [0, 1), got {b!r}")
    return b / (1.0 - b)


def min_leakage(r_prime: complex) -> float:
    """Smallest leakage amplitude that can explain the tilt of R'."""
    r_prime = complex(r_prime)
    mag = abs(r_prime)
    if mag == 0.0:
        raise DegenerateGeometryError("R' = 0: resonance indistinguishable from the baseline")
    bt = abs(r_prime.imag) / mag
    return bt / (1.0 + bt)


def invert_center(m_prime: complex, b: float, phi: float) -> complex:
    """Fano-free centerpoint M for an assumed leakage phasor."""
    r_prime = 1.0 - complex(m_prime)
    bt = _tilde(b)
    return complex(m_prime) - abs(r_prime) * bt * np.exp(1j * (phi + np.angle(r_prime)))


def radii_range(r_prime: complex, b: float) -> Triple:
    """(R_min, R_mid, R_max) of the real-axis centerpoints reachable with amplitude b.

    R_min is clipped at 0. R_max may exceed the physical limit.
    """
    r_prime = complex(r_prime)
    bt = _tilde(b)
    rad = abs(r_prime) * bt
    disc = rad * rad - r_prime.imag ** 2
    if disc < 0:
        if disc >= -_FEAS_RTOL * max(rad * rad, r_prime.imag ** 2):
            disc = 0.0
        else:
            raise FeasibilityError(
                f"leakage bound b = {b:.6g} cannot explain the circle tilt",
                b_min=min_leakage(r_prime))
    half = math.sqrt(disc)
    mid = r_prime.real
    return Triple(max(mid - half, 0.0), mid, mid + half)


def _quality_triples(radii: Triple, q_l: float, mode: MeasurementMode):
    lo = quality_from_radius(radii.min, q_l, mode)
    mid = quality_from_radius(radii.mid, q_l, mode)
    hi = quality_from_radius(radii.max, q_l, mode)
    # a larger radius means lower internal loss and stronger coupling
    q_i = Triple(lo[0], mid[0], hi[0])
    q_c = Triple(hi[1], mid[1], lo[1])
    return q_i, q_c


def qi_range(fit: CircleFitResult, b: float | None = None, *, bound_db: float | None = None,
             mode: MeasurementMode | str | None = None) -> QiRange:
    """Q_i and Q_c ranges for a fitted trace under a leakage bound.

    Give the bound either as amplitude ``b`` or as isolation ``bound_db``.
    A bound below the minimal consistent leakage is not an error: the range
    is evaluated at b_min and flagged.
    """
    if (b is None) == (bound_db is None):
        raise InvalidInputError("give exactly one of b or bound_db")
    if bound_db is not None:
        b = leakage_db_to_linear(bound_db)
    _tilde(b)
    mode = MeasurementMode.parse(mode if mode is not None else fit.mode)
    r_prime = complex(fit.r_prime)
    b_min = min_leakage(r_prime)
    warnings = []
    infeasible = False
    try:
        radii = radii_range(r_prime, b)
    except FeasibilityError:
        infeasible = True
        warnings.append(INFEASIBLE_BOUND)
        radii = radii_range(r_prime, b_min)
    q_i, q_c = _quality_triples(radii, fit.q_l, mode)
    if math.isinf(q_i.max):
        warnings.append(UNBOUNDED_QI)
    return QiRange(q_i, q_c, radii, float(b), float(b_min), mode, infeasible, warnings)


def diameter_correction_qi(fit: CircleFitResult, mode: MeasurementMode | str | None = None) -> float:
    """Q_i from projecting the fitted centerpoint onto the real axis."""
    mode = MeasurementMode.parse(mode if mode is not None else fit.mode)
    return quality_from_radius(complex(fit.r_prime).real, fit.q_l, mode)[0]


def center_circle(x: float, b: float) -> CenterCircle:
    """Circle traced by M'(phi) for a real centerpoint x and leakage amplitude b."""
    bt = _tilde(b)
    if bt >= 1.0:
        raise DivergentGeometryError("b >= 0.5: the centerpoint circle is unbounded")
    den = 1.0 - bt * bt
    return CenterCircle((x - bt * bt) / den, (1.0 - x) * bt / den, math.asin(bt))


def band_row(coupling: float, b: float, mode: MeasurementMode | str = MeasurementMode.REFLECTION) -> dict:
    """Worst-case relative Q_i range for one coupling and amplitude.

    M' is placed on the real axis, where the spread is largest.
    """
    mode = MeasurementMode.parse(mode)
    if not coupling > 0:
        raise InvalidInputError("coupling must be > 0")
    r_mid = coupling_to_radius(coupling, mode)
    radii = radii_range(complex(r_mid, 0.0), b)
    q_i, _ = _quality_triples(radii, 1.0, mode)
    rel_min = q_i.min / q_i.mid
    rel_max = INF if math.isinf(q_i.max) else q_i.max / q_i.mid
    r_refl = coupling_to_radius(coupling, MeasurementMode.REFLECTION)
    r_notch = coupling_to_radius(coupling, MeasurementMode.NOTCH_TRANSMISSION)
    s21 = abs(1.0 - 2.0 * r_notch)
    return {
        "coupling_mid": float(coupling),
        "b": float(b),
        "b_db": leakage_linear_to_db(b),
        "qi_rel_min": rel_min,
        "qi_rel_max": rel_max,
        "dip_reflection": 1.0 - abs(1.0 - 2.0 * r_refl),
        "dip_transmission": 1.0 - s21,
        "s21_at_resonance": s21,
    }


def default_coupling_grid(lo: float = 0.1, hi: float = 100.0, points: int = 61) -> np.ndarray:
    if not (0 < lo < hi) or points < 2:
        raise InvalidInputError("coupling range must satisfy 0 < lo < hi with >= 2 points")
    return np.logspace(math.log10(lo), math.log10(hi), int(points))


def uncertainty_band(coupling_grid=None, b_list=None,
                     mode: MeasurementMode | str = MeasurementMode.REFLECTION) -> list[dict]:
    """Rows ordered by b, then coupling. Defaults cover 0.1..100 and -25..-10 dB."""
    if coupling_grid is None:
        coupling_grid = default_coupling_grid()
    if b_list is None:
        b_list = [leakage_db_to_linear(db) for db in DEFAULT_BAND_DB]
    return [band_row(float(k), float(b), mode) for b in b_list for k in coupling_grid]
