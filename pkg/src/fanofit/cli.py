"""Command-line entry point.

Exit codes: 0 success, 1 invalid arguments, 2 fit failure, 3 unreadable or
malformed input. Warnings never change the exit code. Errors are written to
stderr as JSON records. A failing ``fit`` writes no report; ``sweep`` still
reports every trace, with error records in place of failed fits.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io as fio
from .circlefit import CIRCLE_INTERSECTION, DELAY_AUTO, DELAY_OFF, EDGE_MEAN, FitConfig, fit_pipeline
from .errors import FanoFitError, InvalidInputError, TraceParseError
from .model import (
    FanoBackground,
    MeasurementMode,
    ResonatorParams,
    leakage_db_to_linear,
)
from .synth import (
    GALLERY_PHIS,
    SynthSpec,
    synth_background_pattern,
    synth_lineshape_gallery,
    synth_trace,
)
from .trajectory import CenterTrajectory, calibrate_trajectory, trajectory_report
from .uncertainty import DEFAULT_BAND_DB, default_coupling_grid, qi_range, uncertainty_band

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FIT = 2
EXIT_INPUT = 3

DEFAULT_BOUND_DB = -20.0
BAND_COLUMNS = ["coupling_mid", "b_db", "b", "qi_rel_min", "qi_rel_max",
                "dip_reflection", "dip_transmission", "s21_at_resonance"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _exit_code(exc: FanoFitError) -> int:
    if isinstance(exc, TraceParseError):
        return EXIT_INPUT
    if isinstance(exc, InvalidInputError) and exc.stage is None:
        return EXIT_USAGE
    return EXIT_FIT


def _threads() -> int:
    raw = os.environ.get("FANOFIT_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_delay(value: str):
    if value in (DELAY_AUTO, DELAY_OFF):
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("delay must be auto, off or seconds") from None


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None


def _bound_db(value: str) -> float:
    v = float(value)
    if not v < 0:
        raise argparse.ArgumentTypeError("leakage bound must be below 0 dB")
    return v


def _fit_config(args) -> FitConfig:
    return FitConfig(mode=MeasurementMode.parse(args.mode), delay_removal=args.delay,
                     off_resonant_estimator=args.estimator, refine=not args.no_refine)


def _fit_one(path, cfg: FitConfig, bound_db: float) -> dict:
    trace = fio.read_trace(path)
    fit = fit_pipeline(trace, cfg)
    rng = qi_range(fit, bound_db=bound_db, mode=cfg.mode)
    return fio.fit_record(str(path), fit, rng), fit


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_fit(args) -> int:
    rec, _ = _fit_one(args.input, _fit_config(args), args.bound_db)
    _emit(fio.dumps_report(rec), args.out)
    return EXIT_OK


def _sweep_inputs(args) -> list[tuple[Path, str]]:
    entries = []
    if args.manifest:
        entries.extend(fio.read_manifest(args.manifest))
    for pattern in args.inputs:
        matches = sorted(glob.glob(pattern))
        if not matches:
            raise TraceParseError(f"no files match {pattern!r}")
        entries.extend((Path(m), Path(m).stem) for m in matches)
    if not entries:
        raise TraceParseError("no input traces given")
    return entries


def _run_batch(entries, cfg, bound_db):
    """Fit every entry; results keep manifest order whatever the scheduling."""
    def job(entry):
        path, _ = entry
        try:
            return _fit_one(path, cfg, bound_db)
        except FanoFitError as exc:
            return exc, None

    with ThreadPoolExecutor(max_workers=min(_threads(), len(entries))) as pool:
        return list(pool.map(job, entries))


def cmd_sweep(args) -> int:
    entries = _sweep_inputs(args)
    cfg = _fit_config(args)
    results = _run_batch(entries, cfg, args.bound_db)
    records, summary, first_error = [], [], None
    for (path, label), (rec, _) in zip(entries, results):
        if isinstance(rec, FanoFitError):
            records.append({"label": label, **fio.error_record(rec, str(path))})
            first_error = first_error or rec
            continue
        records.append({"label": label, **rec})
        summary.append({"label": label, "q_i_min": rec["q_i"]["min"],
                        "q_i_mid": rec["q_i"]["mid"], "q_i_max": rec["q_i"]["max"]})
    _emit(fio.dumps_report({"records": records, "summary": summary}), args.out)
    if args.summary:
        Path(args.summary).write_text(
            fio.format_table(summary, ["label", "q_i_min", "q_i_mid", "q_i_max"]), encoding="utf-8")
    if first_error is not None and not args.keep_going:
        return _exit_code(first_error)
    return EXIT_OK


def _read_centers(path) -> CenterTrajectory:
    try:
        rows = fio.parse_table(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise TraceParseError(f"cannot read {path}: {exc}") from None
    try:
        labels = [r["label"] for r in rows]
        m = [complex(r["m_re"], r["m_im"]) for r in rows]
        q_l = [r["q_l"] for r in rows]
    except (KeyError, TypeError):
        raise TraceParseError(f"{path}: columns must be label,m_re,m_im,q_l") from None
    try:
        return CenterTrajectory(labels, m, q_l)
    except InvalidInputError as exc:
        raise TraceParseError(f"{path}: {exc}") from None


def _label_value(label: str, index: int) -> float:
    try:
        return float(label)
    except ValueError:
        return float(index)


def cmd_trajectory(args) -> int:
    mode = MeasurementMode.parse(args.mode)
    per_trace = []
    if args.centers:
        traj = _read_centers(args.centers)
    else:
        entries = fio.read_manifest(args.manifest)
        if len(entries) < 5:
            raise TraceParseError(f"trajectory needs at least 5 traces, manifest lists {len(entries)}")
        results = _run_batch(entries, _fit_config(args), DEFAULT_BOUND_DB)
        for (path, _), (rec, _) in zip(entries, results):
            if isinstance(rec, FanoFitError):
                if rec.stage is None:
                    rec.stage = f"trace {path}"
                raise rec
        fits = [fit for _, fit in results]
        labels = [lab for _, lab in entries]
        traj = CenterTrajectory([_label_value(lab, i) for i, lab in enumerate(labels)],
                                [f.m_prime for f in fits], [f.q_l for f in fits])
        per_trace = [{"input_path": str(p), "label": lab, "m_prime": complex(f.m_prime), "q_l": f.q_l}
                     for (p, lab), f in zip(entries, fits)]
    cal = calibrate_trajectory(traj, robust=args.robust, mode=mode)
    report = trajectory_report(traj, cal)
    extra = {"traces": per_trace} if per_trace else None
    _emit(fio.dumps_report(fio.calibration_record(cal, report, extra=extra)), args.out)
    return EXIT_OK


def cmd_bands(args) -> int:
    if args.b_list is not None and args.b_list_db is not None:
        raise UsageError("give either --b-list or --b-list-db")
    if args.b_list is not None:
        b_values = args.b_list
        if any(not 0 <= b < 0.5 for b in b_values):
            raise UsageError("linear leakage amplitudes must lie in [0, 0.5)")
    else:
        dbs = args.b_list_db if args.b_list_db is not None else list(DEFAULT_BAND_DB)
        if any(not db < 0 for db in dbs):
            raise UsageError("leakage bounds must be below 0 dB")
        b_values = [leakage_db_to_linear(db) for db in dbs]
    lo, hi = args.coupling_range
    rows = uncertainty_band(default_coupling_grid(lo, hi, args.points), b_values, args.mode)
    _emit(fio.format_table(rows, BAND_COLUMNS), args.out)
    return EXIT_OK


_SPEC_KEYS = ("f_r", "q_i", "q_c", "mode", "b", "b_db", "phi", "path_length", "gain_re",
              "gain_im", "delay", "span", "noise", "seed")


def _synth_spec(args) -> SynthSpec:
    opts = {}
    if args.spec:
        try:
            opts = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise TraceParseError(f"cannot read spec {args.spec}: {exc}") from None
    for key in _SPEC_KEYS:
        value = getattr(args, key)
        if value is not None:
            opts[key] = value
    unknown = set(opts) - set(_SPEC_KEYS)
    if unknown:
        raise InvalidInputError(f"unknown spec keys: {sorted(unknown)}")
    if "b" in opts and "b_db" in opts:
        raise InvalidInputError("give either b or b_db")
    b = leakage_db_to_linear(float(opts["b_db"])) if "b_db" in opts else float(opts.get("b", 0.0))
    params = ResonatorParams(float(opts.get("f_r", 5e9)), float(opts.get("q_i", 6e4)),
                             float(opts.get("q_c", 2e4)), opts.get("mode", "reflection"))
    bg = FanoBackground(b, float(opts.get("phi", 0.0)), opts.get("path_length"))
    span = opts.get("span")
    if span is not None:
        span = (float(span[0]), float(span[1]), int(span[2]))
    return SynthSpec(params, bg, complex(float(opts.get("gain_re", 1.0)), float(opts.get("gain_im", 0.0))),
                     float(opts.get("delay", 0.0)), span, float(opts.get("noise", 0.0)),
                     int(opts.get("seed", 0)))


def cmd_synth(args) -> int:
    if args.gallery:
        b = args.b if args.b is not None else (
            leakage_db_to_linear(args.b_db) if args.b_db is not None else 0.18)
        rows = []
        for shape in synth_lineshape_gallery(b, GALLERY_PHIS):
            rows.extend({"phi": shape.phi, "detuning": float(x), "amplitude": float(a)}
                        for x, a in zip(shape.detuning, shape.amplitude))
        _emit(fio.format_table(rows, ["phi", "detuning", "amplitude"]), args.out)
        return EXIT_OK
    if args.background:
        b = args.b if args.b is not None else (
            leakage_db_to_linear(args.b_db) if args.b_db is not None else 0.18)
        length = args.path_length if args.path_length is not None else 0.10
        span = args.span or (4e9, 6e9, 2001)
        f, amp = synth_background_pattern(b, length, (span[0], span[1], int(span[2])),
                                          phi0=args.phi or 0.0)
        rows = [{"frequency_hz": float(x), "amplitude": float(a)} for x, a in zip(f, amp)]
        _emit(fio.format_table(rows, ["frequency_hz", "amplitude"]), args.out)
        return EXIT_OK
    spec = _synth_spec(args)
    trace = synth_trace(spec)
    text = fio.format_trace(trace, args.format)
    _emit(text, args.out)
    if args.out:
        Path(str(args.out) + ".truth.json").write_text(fio.dumps_report(spec.truth()), encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_fit_flags(p):
    p.add_argument("--mode", default="reflection", help="reflection or transmission (notch)")
    p.add_argument("--bound-db", type=_bound_db, default=DEFAULT_BOUND_DB,
                   help="leakage power bound b^2 in dB (default -20)")
    p.add_argument("--delay", type=_parse_delay, default=DELAY_AUTO,
                   help="auto, off, or a fixed cable delay in seconds")
    p.add_argument("--estimator", choices=[CIRCLE_INTERSECTION, EDGE_MEAN], default=CIRCLE_INTERSECTION,
                   help="off-resonant point estimator")
    p.add_argument("--no-refine", action="store_true", help="skip geometric circle refinement")
    p.add_argument("--out", help="write the report to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fanofit", description="Resonator circle fits with Fano-leakage uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one trace and report the Q_i range")
    p.add_argument("input")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="fit many traces")
    p.add_argument("inputs", nargs="*", help="trace files or glob patterns")
    p.add_argument("--manifest", help="CSV of path[,label] rows")
    p.add_argument("--keep-going", action="store_true", help="exit 0 even if some traces fail")
    p.add_argument("--summary", help="also write the label/Q_i summary table here")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trajectory", help="calibrate the leakage from a centerpoint sweep")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="CSV of path,label rows (labels numeric)")
    src.add_argument("--centers", help="CSV with label,m_re,m_im,q_l columns")
    robust = p.add_mutually_exclusive_group()
    robust.add_argument("--robust", dest="robust", action="store_true", default=True)
    robust.add_argument("--no-robust", dest="robust", action="store_false")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("bands", help="relative Q_i uncertainty table")
    p.add_argument("--b-list-db", type=_float_list, help="comma-separated bounds in dB")
    p.add_argument("--b-list", type=_float_list, help="comma-separated linear amplitudes")
    p.add_argument("--coupling-range", type=_float_list, default=[0.1, 100.0],
                   help="lo,hi of the Q_i/Q_c grid")
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--mode", default="reflection")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("synth", help="write synthetic traces or reference curves")
    what = p.add_mutually_exclusive_group()
    what.add_argument("--gallery", action="store_true", help="lineshapes for five leakage phases")
    what.add_argument("--background", action="store_true", help="off-resonant interference pattern")
    p.add_argument("--spec", help="JSON file with synthesis parameters")
    p.add_argument("--f-r", dest="f_r", type=float)
    p.add_argument("--q-i", dest="q_i", type=float, help="internal Q (inf allowed)")
    p.add_argument("--q-c", dest="q_c", type=float)
    p.add_argument("--mode")
    leak = p.add_mutually_exclusive_group()
    leak.add_argument("--b", type=float, help="leakage amplitude")
    leak.add_argument("--b-db", dest="b_db", type=float, help="leakage power in dB")
    p.add_argument("--phi", type=float)
    p.add_argument("--path-length", dest="path_length", type=float, help="metres")
    p.add_argument("--gain-re", dest="gain_re", type=float)
    p.add_argument("--gain-im", dest="gain_im", type=float)
    p.add_argument("--delay", type=float, help="cable delay in seconds")
    p.add_argument("--span", type=_float_list, help="f_start,f_stop,n_points")
    p.add_argument("--noise", type=float, help="per-quadrature noise sigma")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["reim", "dbphase"], default="reim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def _report_error(record: dict) -> None:
    sys.stderr.write(json.dumps(fio._jsonable(record)) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "coupling_range", None) is not None and len(args.coupling_range) != 2:
            raise UsageError("--coupling-range needs lo,hi")
        if getattr(args, "span", None) is not None and len(args.span) != 3:
            raise UsageError("--span needs f_start,f_stop,n_points")
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except UsageError as exc:
        _report_error({"error": {"code": "USAGE", "stage": None, "message": str(exc)}})
        return EXIT_USAGE
    except FanoFitError as exc:
        _report_error(fio.error_record(exc))
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
