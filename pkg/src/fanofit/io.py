"""Trace files, manifests, report records and delimited tables.

Trace files are comma-separated text with ``#`` comment lines. A comment of
the form ``# key=value`` carries metadata. The header names the columns,
either ``frequency_hz,re,im`` or ``frequency_hz,amplitude_db,phase_rad``;
the format is chosen by header only. Floats are written with ``repr`` so
write -> read -> write reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .circlefit import CircleFitResult, Trace
from .errors import FanoFitError, InvalidInputError, TraceParseError
from .model import leakage_linear_to_db
from .trajectory import CalibrationResult
from .uncertainty import QiRange

REIM_HEADER = ("frequency_hz", "re", "im")
DBPHASE_HEADER = ("frequency_hz", "amplitude_db", "phase_rad")


def _fmt(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------

def parse_trace(text: str, source: str = "<string>") -> Trace:
    meta: dict = {}
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if header is None:
            header = tuple(c.lower() for c in cells)
            if header not in (REIM_HEADER, DBPHASE_HEADER):
                raise TraceParseError(
                    f"{source}:{lineno}: header must be {','.join(REIM_HEADER)} "
                    f"or {','.join(DBPHASE_HEADER)}, got {line!r}")
            continue
        if len(cells) != 3:
            raise TraceParseError(f"{source}:{lineno}: expected 3 columns, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise TraceParseError(f"{source}:{lineno}: non-numeric value in {line!r}") from None
    if header is None:
        raise TraceParseError(f"{source}: missing header row")
    if not rows:
        raise TraceParseError(f"{source}: no data rows")
    data = np.array(rows)
    f = data[:, 0]
    if header == REIM_HEADER:
        z = data[:, 1] + 1j * data[:, 2]
    else:
        z = 10.0 ** (data[:, 1] / 20.0) * np.exp(1j * data[:, 2])
    meta.setdefault("format", "reim" if header == REIM_HEADER else "dbphase")
    try:
        return Trace(f, z, meta, columns=data)
    except InvalidInputError as exc:
        raise TraceParseError(f"{source}: {exc}") from None


def read_trace(path) -> Trace:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceParseError(f"cannot read {path}: {exc}") from None
    return parse_trace(text, str(path))


def format_trace(trace: Trace, fmt: str | None = None) -> str:
    """Serialize a trace; ``fmt`` is ``reim`` or ``dbphase`` (default: from meta, else reim)."""
    fmt = fmt or trace.meta.get("format", "reim")
    if fmt not in ("reim", "dbphase"):
        raise InvalidInputError(f"unknown trace format {fmt!r}")
    out = io.StringIO()
    for key, value in trace.meta.items():
        if key == "format":
            continue
        out.write(f"# {key}={value}\n")
    out.write(",".join(REIM_HEADER if fmt == "reim" else DBPHASE_HEADER) + "\n")
    if trace.columns is not None and trace.meta.get("format", "reim") == fmt:
        for row in trace.columns:
            out.write(",".join(_fmt(v) for v in row) + "\n")
        return out.getvalue()
    for f, z in zip(trace.freqs, trace.points):
        if fmt == "reim":
            a, b = z.real, z.imag
        else:
            a, b = 20.0 * math.log10(abs(z)), math.atan2(z.imag, z.real)
        out.write(f"{_fmt(f)},{_fmt(a)},{_fmt(b)}\n")
    return out.getvalue()


def write_trace(trace: Trace, path, fmt: str | None = None) -> None:
    Path(path).write_text(format_trace(trace, fmt), encoding="utf-8")


# --------------------------------------------------------------------------
# manifests
# --------------------------------------------------------------------------

def parse_manifest(text: str, base: Path | None = None) -> list[tuple[Path, str]]:
    """``path[,label]`` rows, optional ``path,label`` header, ``#`` comments.

    Relative paths resolve against ``base``. Labels default to the file stem.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if not entries and cells[0].lower() == "path":
            continue
        if len(cells) > 2 or not cells[0]:
            raise TraceParseError(f"manifest line {lineno}: expected path[,label]")
        p = Path(cells[0])
        if base is not None and not p.is_absolute():
            p = base / p
        label = cells[1] if len(cells) == 2 and cells[1] else p.stem
        entries.append((p, label))
    if not entries:
        raise TraceParseError("manifest lists no traces")
    return entries


def read_manifest(path) -> list[tuple[Path, str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceParseError(f"cannot read manifest {path}: {exc}") from None
    return parse_manifest(text, path.parent)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def _jsonable(obj):
    """Replace infinities with strings and numpy scalars with Python numbers."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def dumps_report(record) -> str:
    return json.dumps(_jsonable(record), indent=2) + "\n"


def _restore(obj):
    if isinstance(obj, dict):
        return {k: _restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore(v) for v in obj]
    if obj == "inf":
        return math.inf
    if obj == "-inf":
        return -math.inf
    return obj


def loads_report(text: str):
    """Parse a report; ``"inf"`` strings come back as float infinities."""
    return _restore(json.loads(text))


def fit_record(input_path: str, fit: CircleFitResult, rng: QiRange) -> dict:
    return {
        "input_path": str(input_path),
        "mode": rng.mode.value,
        "f_r_hz": fit.f_r,
        "kappa_hz": fit.kappa,
        "q_l": fit.q_l,
        "q_i": rng.q_i.as_dict(),
        "q_c": rng.q_c.as_dict(),
        "radius": rng.r.as_dict(),
        "m_prime": complex(fit.m_prime),
        "b_assumed": rng.b_assumed,
        "b_assumed_db": leakage_linear_to_db(rng.b_assumed),
        "b_min": rng.b_min,
        "bound_feasible": not rng.infeasible,
        "delay_s": fit.delay,
        "off_resonant": complex(fit.off_resonant),
        "rms_residual": fit.rms_residual,
        "warnings": list(fit.warnings) + list(rng.warnings),
    }


def calibration_record(cal: CalibrationResult, report: dict, extra=None) -> dict:
    rec = {
        "mode": cal.mode.value,
        "b": cal.b,
        "b_db": cal.b_db,
        "m_true": cal.m_true,
        "q_i_true": cal.q_i,
        "q_c_true": cal.q_c,
        "q_l_median": cal.q_l_median,
        "x_c": cal.x_c,
        "r_c": cal.r_c,
        "arc_coverage": cal.arc_coverage,
        "rms": cal.rms,
        "residuals": report["residuals"],
        "labels": report["labels"],
        "implied_b": report["implied_b"],
        "inliers": report["inliers"],
        "flagged_segments": report["flagged_segments"],
        "kendall_tau": report["kendall_tau"],
        "warnings": list(cal.warnings) + list(report["flags"]),
    }
    if extra:
        rec.update(extra)
    return rec


def error_record(exc: FanoFitError, input_path: str | None = None) -> dict:
    rec = {"error": exc.to_record()}
    if input_path is not None:
        rec = {"input_path": str(input_path), **rec}
    return rec


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def format_table(rows: list[dict], columns: list[str]) -> str:
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            cells.append(_fmt(v) if isinstance(v, (float, np.floating)) else str(v))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def parse_table(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for row in reader:
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = float(v)
            except (TypeError, ValueError):
                parsed[k] = v
        rows.append(parsed)
    return rows
