"""Circle fit of complex scattering data.

The chain mirrors the usual resonator circle-fit recipe:

1. remove the cable delay (the circle must not be smeared into a spiral),
2. divide by the off-resonant point so it sits at (1, 0),
3. fit the circle center M' of the normalized data,
4. fit the phase of S' - M' against frequency for f_r and Q_l.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import (
    DegenerateGeometryError,
    DelayEstimationError,
    FanoFitError,
    InvalidInputError,
    NormalizationError,
    PhaseFitError,
)
from .model import MeasurementMode

logger = logging.getLogger(__name__)

MIN_SAMPLES = 16

DELAY_AUTO = "auto"
DELAY_OFF = "off"
EDGE_MEAN = "edge-mean"
CIRCLE_INTERSECTION = "circle-intersection"

# warning codes
BIASED_BASELINE = "BIASED_BASELINE"


@dataclass
class Trace:
    """Frequency-ordered complex scattering samples."""

    freqs: np.ndarray
    points: np.ndarray
    meta: dict = field(default_factory=dict)
    # the three columns as read from file, so a parsed file can be written back verbatim
    columns: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.points = np.asarray(self.points, dtype=complex)
        if self.freqs.ndim != 1 or self.points.shape != self.freqs.shape:
            raise InvalidInputError("freqs and points must be 1-d and of equal length")
        if self.freqs.size < MIN_SAMPLES:
            raise InvalidInputError(
                f"need at least {MIN_SAMPLES} samples, got {self.freqs.size}")
        if not (np.all(np.isfinite(self.freqs)) and np.all(np.isfinite(self.points))):
            raise InvalidInputError("trace contains non-finite values")
        if np.any(np.diff(self.freqs) <= 0):
            raise InvalidInputError("frequencies must be strictly increasing")

    def __len__(self):
        return self.freqs.size

    def with_points(self, points) -> "Trace":
        return Trace(self.freqs, points, dict(self.meta))


@dataclass(frozen=True)
class FitConfig:
    """Options for :func:`fit_pipeline`.

    ``delay_removal`` is ``"auto"``, ``"off"`` or a fixed delay in seconds.
    """

    mode: MeasurementMode = MeasurementMode.REFLECTION
    delay_removal: str | float = DELAY_AUTO
    off_resonant_estimator: str = CIRCLE_INTERSECTION
    refine: bool = True
    delay_window: tuple[float, float] = (-100e-9, 100e-9)
    delay_grid_points: int = 81
    edge_fraction: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "mode", MeasurementMode.parse(self.mode))
        d = self.delay_removal
        if isinstance(d, str):
            if d not in (DELAY_AUTO, DELAY_OFF):
                raise InvalidInputError(f"delay_removal must be auto, off or a number, got {d!r}")
        elif not math.isfinite(d):
            raise InvalidInputError("fixed delay must be finite")
        if self.off_resonant_estimator not in (EDGE_MEAN, CIRCLE_INTERSECTION):
            raise InvalidInputError(f"unknown estimator {self.off_resonant_estimator!r}")
        lo, hi = self.delay_window
        if not lo < hi:
            raise InvalidInputError("delay window must be increasing")


@dataclass
class CircleFitResult:
    m_prime: complex
    f_r: float
    kappa: float
    q_l: float
    delay: float
    off_resonant: complex
    rms_residual: float
    radius: float
    mode: MeasurementMode = MeasurementMode.REFLECTION
    warnings: list = field(default_factory=list)

    @property
    def r_prime(self) -> complex:
        return 1.0 - self.m_prime


class CircleFit(NamedTuple):
    center: complex
    radius: float
    rms: float


class _PhaseFit(NamedTuple):
    f_r: float
    q_l: float
    theta0: float
    sign: float
    rms: float


# --------------------------------------------------------------------------
# circle geometry
# --------------------------------------------------------------------------

def _taubin(x, y, w=None):
    """Taubin algebraic circle fit (SVD form). Returns (xc, yc, r)."""
    if w is None:
        w = np.ones_like(x)
    sw = np.sqrt(w)
    wsum = w.sum()
    xm = (w * x).sum() / wsum
    ym = (w * y).sum() / wsum
    u = x - xm
    v = y - ym
    z = u * u + v * v
    zm = (w * z).sum() / wsum
    if zm <= 0 or not np.isfinite(zm):
        raise DegenerateGeometryError("points coincide")
    z0 = (z - zm) / (2.0 * math.sqrt(zm))
    design = np.column_stack([z0, u, v]) * sw[:, None]
    _, s, vt = np.linalg.svd(design, full_matrices=False)
    a = vt[2].copy()
    a0 = a[0] / (2.0 * math.sqrt(zm))
    # a line fits as well as any circle -> no finite circle
    if abs(a0) < 1e-12 * max(abs(a[1]), abs(a[2]), 1.0) / math.sqrt(zm):
        raise DegenerateGeometryError("points are collinear")
    a3 = -zm * a0
    xc = -a[1] / a0 / 2.0 + xm
    yc = -a[2] / a0 / 2.0 + ym
    r = math.sqrt(a[1] ** 2 + a[2] ** 2 - 4.0 * a0 * a3) / abs(a0) / 2.0
    return xc, yc, r


def _check_spread(x, y):
    pts = np.column_stack([x - x.mean(), y - y.mean()])
    s = np.linalg.svd(pts, compute_uv=False)
    if s[0] == 0 or s[1] <= 1e-10 * s[0]:
        raise DegenerateGeometryError("points are collinear or coincide")


def fit_circle(points, refine: bool = True, weights=None) -> CircleFit:
    """Least-squares circle through complex points.

    Taubin's algebraic fit, optionally polished by a geometric
    (Levenberg-Marquardt) fit of the radial residuals. ``weights`` enter
    both stages and are used by the robust trajectory fit.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise DegenerateGeometryError("need at least 3 points for a circle")
    x, y = z.real, z.imag
    w = None if weights is None else np.asarray(weights, dtype=float)
    if w is not None:
        keep = w > 0
        if keep.sum() < 3:
            raise DegenerateGeometryError("fewer than 3 points carry weight")
        _check_spread(x[keep], y[keep])
    else:
        _check_spread(x, y)
    xc, yc, r = _taubin(x, y, w)

    if refine:
        sw = np.ones_like(x) if w is None else np.sqrt(w)
        scale = max(r, 1e-300)

        def resid(p):
            return sw * (np.hypot(x - p[0], y - p[1]) - p[2])

        p0 = np.array([xc, yc, r])
        base = float(np.sum(resid(p0) ** 2))
        if base > (1e-14 * scale) ** 2 * x.size:
            sol = least_squares(resid, p0, method="lm", x_scale=scale,
                                xtol=1e-15, ftol=1e-15, gtol=1e-15)
            if np.all(np.isfinite(sol.x)) and float(np.sum(sol.fun ** 2)) <= base:
                xc, yc, r = sol.x
                r = abs(r)

    d = np.hypot(x - xc, y - yc) - r
    if w is None:
        rms = float(np.sqrt(np.mean(d * d)))
    else:
        rms = float(np.sqrt(np.sum(w * d * d) / np.sum(w)))
    return CircleFit(complex(xc, yc), float(r), rms)


# --------------------------------------------------------------------------
# phase response
# --------------------------------------------------------------------------

def _phase_model(f, theta0, q_l, f_r, sign):
    return theta0 + sign * 2.0 * np.arctan(2.0 * q_l * (1.0 - f / f_r))


def _max_drawdown(theta, direction):
    t = direction * theta
    running = np.maximum.accumulate(t)
    return float(np.max(running - t))


def _crossing(f, theta, level):
    """First frequency where theta crosses ``level`` (linear interpolation)."""
    d = theta - level
    idx = np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0]
    if idx.size == 0:
        return None
    i = idx[0]
    if d[i + 1] == d[i]:
        return float(f[i])
    return float(f[i] - d[i] * (f[i + 1] - f[i]) / (d[i + 1] - d[i]))


def _phase_fit(freqs, centered) -> _PhaseFit:
    f = np.asarray(freqs, dtype=float)
    theta = np.unwrap(np.angle(np.asarray(centered, dtype=complex)))
    total = theta[-1] - theta[0]
    if abs(total) < 0.5 * math.pi:
        raise PhaseFitError(
            f"phase sweeps only {abs(total):.3f} rad across the trace; no resonance in span")
    # model phase falls with frequency for sign=+1
    sign = -1.0 if total > 0 else 1.0
    if _max_drawdown(theta, -sign) > 0.5 * math.pi:
        raise PhaseFitError("unwrapped phase is not monotonic")

    mid = 0.5 * (theta[0] + theta[-1])
    f_r0 = _crossing(f, theta, mid)
    if f_r0 is None:
        f_r0 = float(f[np.argmax(np.abs(np.gradient(theta, f)))])
    # f_r -/+ kappa/2 sit at theta(f_r) -/+ pi/2
    f_a = _crossing(f, theta, mid + 0.5 * math.pi)
    f_b = _crossing(f, theta, mid - 0.5 * math.pi)
    if f_a is not None and f_b is not None and f_a != f_b:
        kappa0 = abs(f_b - f_a)
    else:
        kappa0 = (f[-1] - f[0]) / 4.0
    theta00 = mid

    # f_r in units of the initial linewidth, Q_l on a log scale, for conditioning
    def resid(p):
        theta0 = p[0]
        q_l = (f_r0 / kappa0) * math.exp(p[1])
        f_r = f_r0 + p[2] * kappa0
        return _phase_model(f, theta0, q_l, f_r, sign) - theta

    p0 = np.array([theta00, 0.0, 0.0])
    try:
        sol = least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=2000)
    except (ValueError, FloatingPointError) as exc:
        raise PhaseFitError(f"phase fit failed: {exc}") from exc
    if not np.all(np.isfinite(sol.x)):
        raise PhaseFitError("phase fit diverged")
    theta0, lq, df = sol.x
    q_l = (f_r0 / kappa0) * math.exp(lq)
    f_r = f_r0 + df * kappa0
    if not (f[0] - (f[-1] - f[0]) <= f_r <= f[-1] + (f[-1] - f[0])) or q_l <= 0:
        raise PhaseFitError("fitted resonance lies far outside the measured span")
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return _PhaseFit(float(f_r), float(q_l), float(theta0), sign, rms)


def fit_phase_response(freqs, centered_points) -> tuple[float, float]:
    """Fit theta(f) = theta0 + 2 arctan(2 Q_l (1 - f/f_r)) to S' - M'.

    Returns ``(f_r, q_l)``; the linewidth is ``f_r / q_l``.
    """
    pf = _phase_fit(freqs, centered_points)
    return pf.f_r, pf.q_l


# --------------------------------------------------------------------------
# calibration steps
# --------------------------------------------------------------------------

def _rel_rms(z):
    # bare Taubin fit: this runs for every trial delay
    xc, yc, r = _taubin(z.real, z.imag)
    d = np.hypot(z.real - xc, z.imag - yc) - r
    return float(np.sqrt(np.mean(d * d))) / r


def remove_cable_delay(trace: Trace, cfg: FitConfig = FitConfig()) -> tuple[Trace, float]:
    """Undo the propagation delay by multiplying with exp(+2 pi i f tau).

    In auto mode tau minimizes the relative circle-fit residual over
    ``cfg.delay_window``: a coarse grid brackets the minimum, then a bounded
    Brent search (golden section with parabolic steps) polishes it.
    """
    d = cfg.delay_removal
    if d == DELAY_OFF:
        return trace, 0.0
    if not isinstance(d, str):
        tau = float(d)
        return trace.with_points(trace.points * np.exp(2j * np.pi * trace.freqs * tau)), tau

    f, z = trace.freqs, trace.points
    # rotation by the mean frequency is a rigid rotation and does not change circularity
    df = f - 0.5 * (f[0] + f[-1])
    lo, hi = (t * 1e9 for t in cfg.delay_window)  # search in ns

    def cost(tau_ns):
        try:
            return _rel_rms(z * np.exp(2j * np.pi * df * tau_ns * 1e-9))
        except DegenerateGeometryError:
            return math.inf

    grid = np.linspace(lo, hi, cfg.delay_grid_points)
    if not np.any(grid == 0.0) and lo < 0 < hi:
        grid = np.sort(np.append(grid, 0.0))
    costs = np.array([cost(t) for t in grid])
    if not np.any(np.isfinite(costs)):
        raise DelayEstimationError("circle fit failed for every trial delay", best_delay=0.0)
    i = int(np.nanargmin(costs))
    if i == 0 or i == grid.size - 1:
        raise DelayEstimationError(
            "delay search hit the window edge; true delay likely outside the window",
            best_delay=float(grid[i]) * 1e-9)
    # the full-model polish below supplies the last digits
    t0 = grid[i]
    res = minimize_scalar(lambda d: cost(t0 + d), bounds=(grid[i - 1] - t0, grid[i + 1] - t0),
                          method="bounded", options={"xatol": 1e-3, "maxiter": 500})
    tau_ns = float(t0 + res.x) if res.fun <= costs[i] else float(t0)
    tau_ns = _polish_delay(f, z, tau_ns)
    tau = tau_ns * 1e-9
    return trace.with_points(z * np.exp(2j * np.pi * f * tau)), tau


def _polish_delay(f, z, tau_ns: float) -> float:
    """Refine the delay by a least-squares fit of the full complex lineshape.

    For a circle symmetric about the line through its center and the
    off-resonant point, the circularity cost is flat to second order in the
    delay error; the full model constrains it to first order.
    """
    df = f - 0.5 * (f[0] + f[-1])
    z1 = z * np.exp(2j * np.pi * df * tau_ns * 1e-9)
    try:
        circ = fit_circle(z1, refine=False)
        pf = _phase_fit(f, z1 - circ.center)
    except FanoFitError:
        return tau_ns
    a0 = circ.center + circ.radius * np.exp(1j * (pf.theta0 + math.pi))
    d0 = -2.0 * circ.radius * np.exp(1j * pf.theta0)
    kappa0 = pf.f_r / pf.q_l
    scale = abs(a0) + circ.radius
    # one linewidth's worth of phase ramp per unit of the delay parameter
    tau_unit = 1e9 / (2 * math.pi * kappa0)

    def model(p):
        q_l = pf.q_l * math.exp(p[4])
        f_r = pf.f_r + p[5] * kappa0
        lor = 1.0 / (1.0 + pf.sign * 2j * q_l * (f - f_r) / f_r)
        shape = complex(p[0], p[1]) - complex(p[2], p[3]) * lor
        return shape * np.exp(-2j * np.pi * df * p[6] * tau_unit * 1e-9)

    def resid(p):
        r = (model(p) - z1) / scale
        return np.concatenate([r.real, r.imag])

    p0 = np.array([a0.real, a0.imag, d0.real, d0.imag, 0.0, 0.0, 0.0])
    base = float(np.sum(resid(p0) ** 2))
    try:
        sol = least_squares(resid, p0, method="lm", x_scale=np.r_[[scale] * 4, 1, 1, 1],
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
    except (ValueError, FloatingPointError):
        return tau_ns
    if not np.all(np.isfinite(sol.x)) or float(np.sum(sol.fun ** 2)) > base:
        return tau_ns
    return tau_ns + float(sol.x[6]) * tau_unit


def _antipode_of_resonance(trace: Trace, refine: bool) -> complex:
    """Point on the fitted circle opposite the resonance point.

    For f -> +-inf the model phase approaches theta0 -+ pi, so the
    off-resonant point sits at angle theta0 + pi seen from the center.
    """
    circ = fit_circle(trace.points, refine=refine)
    pf = _phase_fit(trace.freqs, trace.points - circ.center)
    return circ.center + circ.radius * np.exp(1j * (pf.theta0 + math.pi))


def normalize_offresonant(trace: Trace, cfg: FitConfig = FitConfig(),
                          warnings: list | None = None) -> tuple[Trace, complex]:
    """Divide the trace by its off-resonant point O.

    ``edge-mean`` averages the outer ``cfg.edge_fraction`` of samples on both
    sides; it is biased unless the span is many linewidths and appends
    ``BIASED_BASELINE`` to ``warnings`` when the span is below 3 kappa.
    ``circle-intersection`` takes the point of the fitted circle diametrically
    opposite the resonance, which is exact for an ideal circle.
    """
    z = trace.points
    if cfg.off_resonant_estimator == EDGE_MEAN:
        n = max(1, int(round(cfg.edge_fraction * z.size)))
        o = complex(np.mean(np.concatenate([z[:n], z[-n:]])))
        if warnings is not None:
            try:
                circ = fit_circle(z, refine=False)
                pf = _phase_fit(trace.freqs, z - circ.center)
                if trace.freqs[-1] - trace.freqs[0] < 3.0 * pf.f_r / pf.q_l:
                    warnings.append(BIASED_BASELINE)
            except FanoFitError:
                logger.debug("span check skipped; quick fit failed")
    else:
        o = complex(_antipode_of_resonance(trace, cfg.refine))
    if not abs(o) >= 1e-12:
        raise NormalizationError(f"off-resonant point |O| = {abs(o):.3g} is too small")
    return trace.with_points(z / o), o


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FanoFitError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise


def fit_pipeline(trace: Trace, cfg: FitConfig = FitConfig()) -> CircleFitResult:
    """Delay removal, normalization, circle fit and phase fit in one call."""
    warnings: list[str] = []
    delayed, tau = _staged("delay", remove_cable_delay, trace, cfg)
    normed, o = _staged("normalize", normalize_offresonant, delayed, cfg, warnings)
    circ = _staged("circle", fit_circle, normed.points, cfg.refine)
    pf = _staged("phase", _phase_fit, normed.freqs, normed.points - circ.center)
    q_l = pf.q_l
    return CircleFitResult(
        m_prime=complex(circ.center),
        f_r=pf.f_r,
        kappa=pf.f_r / q_l,
        q_l=q_l,
        delay=tau,
        off_resonant=o,
        rms_residual=circ.rms,
        radius=circ.radius,
        mode=cfg.mode,
        warnings=warnings,
    )
