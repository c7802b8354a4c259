"""Leakage calibration from a sweep of fitted centerpoints.

When the leakage phase rotates across a sweep (for example because the
resonance is tuned in frequency), the normalized centerpoints M' trace a
circle. Its size relative to the distance from the off-resonant point (1, 0)
gives the leakage amplitude, and its position gives the Fano-free centerpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import kendalltau

from .circlefit import fit_circle
from .errors import CalibrationError, DegenerateGeometryError, InvalidInputError
from .model import INF, MeasurementMode, leakage_linear_to_db, quality_from_radius

MIN_TRAJECTORY_POINTS = 5
TUKEY_ITERATIONS = 3
MAD_THRESHOLD = 3.5
MAD_TO_SIGMA = 1.4826
LOW_ARC_LIMIT = math.pi / 4

LOW_ARC = "LOW_ARC"
NONSTATIONARY = "NONSTATIONARY"
DRIFT = "DRIFT"

# smallest residual scale treated as real signal, relative to the circle radius
_RES_FLOOR = 1e-9
_LOSSLESS_TOL = 1e-12


@dataclass
class CenterTrajectory:
    labels: np.ndarray
    centers: np.ndarray
    q_l: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=float)
        self.centers = np.asarray(self.centers, dtype=complex)
        self.q_l = np.asarray(self.q_l, dtype=float)
        n = self.labels.size
        if self.centers.shape != (n,) or self.q_l.shape != (n,):
            raise InvalidInputError("labels, centers and q_l must have equal length")
        if n < MIN_TRAJECTORY_POINTS:
            raise InvalidInputError(
                f"trajectory needs at least {MIN_TRAJECTORY_POINTS} points, got {n}")
        if not (np.all(np.isfinite(self.centers)) and np.all(np.isfinite(self.q_l))):
            raise InvalidInputError("trajectory contains non-finite values")

    def __len__(self):
        return self.labels.size


@dataclass
class TrajectoryFit:
    x_c: float
    r_c: float
    center: complex
    rms: float
    inliers: np.ndarray
    residuals: np.ndarray
    arc_coverage: float
    warnings: list = field(default_factory=list)

    @property
    def y_c(self) -> float:
        """Off-axis offset of the fitted center; zero for a clean sweep."""
        return self.center.imag


@dataclass
class CalibrationResult:
    b: float
    b_db: float
    m_true: float
    q_i: float
    q_c: float
    q_l_median: float
    x_c: float
    r_c: float
    center: complex
    arc_coverage: float
    rms: float
    per_point_residuals: np.ndarray
    mode: MeasurementMode = MeasurementMode.REFLECTION
    warnings: list = field(default_factory=list)
    inliers: np.ndarray | None = None


def _radial(points, center, radius):
    return np.abs(points - center) - radius


def _mad_sigma(res):
    return MAD_TO_SIGMA * float(np.median(np.abs(res - np.median(res))))


def _arc_coverage(points, center) -> float:
    if points.size < 2:
        return 0.0
    ang = np.sort(np.mod(np.angle(points - center), 2 * math.pi))
    gaps = np.diff(np.append(ang, ang[0] + 2 * math.pi))
    return float(2 * math.pi - gaps.max())


def _tukey_refit(m, center, radius):
    """Cauchy-loss start followed by Tukey biweight reweighting."""
    sigma0 = max(_mad_sigma(_radial(m, center, radius)), _RES_FLOOR * max(radius, 1e-6))

    def resid(p):
        return np.hypot(m.real - p[0], m.imag - p[1]) - p[2]

    sol = least_squares(resid, [center.real, center.imag, radius], loss="cauchy",
                        f_scale=sigma0, x_scale=max(radius, 1e-12))
    if np.all(np.isfinite(sol.x)):
        center, radius = complex(sol.x[0], sol.x[1]), abs(float(sol.x[2]))

    w = np.ones(m.size)
    for _ in range(TUKEY_ITERATIONS):
        res = _radial(m, center, radius)
        cut = MAD_THRESHOLD * max(_mad_sigma(res), _RES_FLOOR * max(radius, 1e-6))
        u = res / cut
        w = np.where(np.abs(u) < 1.0, (1.0 - u * u) ** 2, 0.0)
        if np.count_nonzero(w) < 3:
            break
        try:
            circ = fit_circle(m, weights=w)
        except DegenerateGeometryError:
            break
        center, radius = circ.center, circ.radius
    res = _radial(m, center, radius)
    cut = MAD_THRESHOLD * max(_mad_sigma(res), _RES_FLOOR * max(radius, 1e-6))
    return center, radius, np.abs(res) < cut


def fit_center_trajectory(traj: CenterTrajectory, robust: bool = True) -> TrajectoryFit:
    """Fit a circle to the centerpoints; x_c is its distance-equivalent position on the real axis.

    x_c is taken as 1 - |1 - center| so the result depends only on the
    geometry relative to the off-resonant point.
    """
    m = traj.centers
    circ = fit_circle(m)
    center, radius = circ.center, circ.radius
    inliers = np.ones(m.size, dtype=bool)
    if robust:
        center, radius, inliers = _tukey_refit(m, center, radius)
        if np.count_nonzero(inliers) < 3:
            raise DegenerateGeometryError("robust fit kept fewer than 3 points")
    res = _radial(m, center, radius)
    rms = float(np.sqrt(np.mean(res[inliers] ** 2)))
    cover = _arc_coverage(m[inliers], center)
    warnings = [LOW_ARC] if cover < LOW_ARC_LIMIT else []
    x_c = 1.0 - abs(1.0 - center)
    return TrajectoryFit(float(x_c), float(radius), complex(center), rms, inliers, res,
                         cover, warnings)


def calibrate_leakage(x_c: float, r_c: float, q_l_median: float,
                      mode: MeasurementMode | str = MeasurementMode.REFLECTION,
                      fit: TrajectoryFit | None = None) -> CalibrationResult:
    """Invert the centerpoint circle to the leakage amplitude and the true centerpoint."""
    mode = MeasurementMode.parse(mode)
    if not x_c < 1.0:
        raise CalibrationError("circle center must lie left of the off-resonant point")
    if not r_c >= 0:
        raise CalibrationError("circle radius must be >= 0")
    bt = r_c / (1.0 - x_c)
    if bt >= 1.0:
        raise CalibrationError(f"r_c/(1 - x_c) = {bt:.6g} >= 1: no leakage amplitude below 0.5 fits")
    b = bt / (1.0 + bt)
    x = 1.0 - (1.0 - x_c) * (1.0 - bt * bt)
    radius = 1.0 - x
    if radius / mode.radius_scale >= 1.0 - _LOSSLESS_TOL:
        q_i, q_c = INF, float(q_l_median)
    else:
        q_i, q_c = quality_from_radius(radius, q_l_median, mode)
    if fit is None:
        center, cover, rms, res, warnings = complex(x_c, 0.0), 2 * math.pi, 0.0, np.zeros(0), []
        inliers = None
    else:
        center, cover, rms, res = fit.center, fit.arc_coverage, fit.rms, fit.residuals
        warnings, inliers = list(fit.warnings), fit.inliers
    return CalibrationResult(float(b), leakage_linear_to_db(b), float(x), q_i, q_c,
                             float(q_l_median), float(x_c), float(r_c), center, cover, rms,
                             res, mode, warnings, inliers)


def calibrate_trajectory(traj: CenterTrajectory, robust: bool = True,
                         mode: MeasurementMode | str = MeasurementMode.REFLECTION) -> CalibrationResult:
    fit = fit_center_trajectory(traj, robust=robust)
    q_l_median = float(np.median(traj.q_l[fit.inliers]))
    return calibrate_leakage(fit.x_c, fit.r_c, q_l_median, mode, fit=fit)


def _long_runs(mask, min_len=3):
    """Index ranges [start, stop) of runs of True at least ``min_len`` long."""
    runs, start = [], None
    for i, v in enumerate(np.append(mask, False)):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start >= min_len:
                runs.append((start, i))
            start = None
    return runs


def implied_leakage(centers, x: float) -> np.ndarray:
    """Leakage amplitude each centerpoint implies for a Fano-free centerpoint x."""
    m = np.asarray(centers, dtype=complex)
    bt = np.abs(m - x) / np.abs(1.0 - m)
    return bt / (1.0 + bt)


def trajectory_report(traj: CenterTrajectory, result: CalibrationResult) -> dict:
    """Per-label residuals and flags for a non-constant leakage or Q_i.

    Points are taken in label order. A run of three or more consecutive
    points far off the fitted circle raises NONSTATIONARY. A monotone trend
    in the leakage implied by each point raises DRIFT; the radial residuals
    cannot show it because a circle fit absorbs a slow radius change into a
    shifted center.
    """
    order = np.argsort(traj.labels, kind="stable")
    labels = traj.labels[order]
    m = traj.centers[order]
    res = _radial(m, result.center, result.r_c)
    floor = _RES_FLOOR * max(result.r_c, 1e-6)
    scale = max(_mad_sigma(res), floor)
    runs = _long_runs(np.abs(res) > 4.0 * scale)
    flags = [NONSTATIONARY] if runs else []
    b_i = implied_leakage(m, result.m_true)
    tau = 0.0
    if np.ptp(b_i) > _RES_FLOOR:
        tau = float(kendalltau(labels, b_i).statistic)
        if abs(tau) > 0.8:
            flags.append(DRIFT)
    return {
        "labels": labels.tolist(),
        "residuals": res.tolist(),
        "implied_b": b_i.tolist(),
        "inliers": None if result.inliers is None else result.inliers[order].tolist(),
        "residual_scale": scale,
        "flagged_segments": [[float(labels[a]), float(labels[b - 1])] for a, b in runs],
        "kendall_tau": tau,
        "flags": flags,
    }
