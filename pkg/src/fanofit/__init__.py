"""Circle-fit analysis of resonator scattering data under Fano leakage."""

from .circlefit import CircleFitResult, FitConfig, Trace, fit_circle, fit_phase_response, fit_pipeline
from .errors import FanoFitError
from .io import read_trace, write_trace
from .model import (
    FanoBackground,
    MeasurementMode,
    ResonatorParams,
    apply_fano,
    coupling_to_radius,
    leakage_db_to_linear,
    normalize_fano,
    radius_to_coupling,
    reflection_response,
    transmission_response,
)
from .synth import SynthSpec, synth_trace, synth_trajectory
from .trajectory import CenterTrajectory, calibrate_leakage, calibrate_trajectory, fit_center_trajectory
from .uncertainty import QiRange, center_circle, min_leakage, qi_range, radii_range, uncertainty_band

__all__ = [
    "CenterTrajectory", "CircleFitResult", "FanoBackground", "FanoFitError", "FitConfig",
    "MeasurementMode", "QiRange", "ResonatorParams", "SynthSpec", "Trace", "apply_fano",
    "calibrate_leakage", "calibrate_trajectory", "center_circle", "coupling_to_radius",
    "fit_center_trajectory", "fit_circle", "fit_phase_response", "fit_pipeline",
    "leakage_db_to_linear", "min_leakage", "normalize_fano", "qi_range", "radii_range",
    "radius_to_coupling", "read_trace", "reflection_response", "synth_trace", "synth_trajectory",
    "transmission_response", "uncertainty_band", "write_trace",
]

__version__ = "0.1.0"
