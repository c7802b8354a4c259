"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class FanoFitError(Exception):
    """Base class. ``stage`` is set when an error escapes the fit pipeline."""

    code = "FANOFIT_ERROR"

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def to_record(self) -> dict:
        return {"code": self.code, "stage": self.stage, "message": str(self)}


class InvalidInputError(FanoFitError, ValueError):
    code = "INVALID_INPUT"


class ModeError(FanoFitError, ValueError):
    code = "MODE_MISMATCH"


class DegenerateNormalizationError(FanoFitError, ZeroDivisionError):
    code = "DEGENERATE_NORMALIZATION"


class DegenerateGeometryError(FanoFitError):
    code = "DEGENERATE_GEOMETRY"


class DelayEstimationError(FanoFitError):
    code = "DELAY_ESTIMATION"

    def __init__(self, message: str, best_delay: float, *, stage: str | None = None):
        super().__init__(message, stage=stage)
        self.best_delay = best_delay


class NormalizationError(FanoFitError):
    code = "NORMALIZATION"


class PhaseFitError(FanoFitError):
    code = "PHASE_FIT"


class FeasibilityError(FanoFitError):
    """Assumed leakage bound is smaller than the minimum consistent with the data."""

    code = "INFEASIBLE_BOUND"

    def __init__(self, message: str, b_min: float, *, stage: str | None = None):
        super().__init__(message, stage=stage)
        self.b_min = b_min


class DivergentGeometryError(FanoFitError):
    code = "DIVERGENT_GEOMETRY"


class CalibrationError(FanoFitError):
    code = "INFEASIBLE_CALIBRATION"


class TraceParseError(FanoFitError):
    code = "PARSE_ERROR"
