"""Command-line interface.

Subcommands: ``simulate``, ``estimate``, ``derivative``, ``bootstrap``,
``bandwidth``, ``bounds``. Estimation reads CSV (header required, ``-`` for
stdin), writes JSON (schema_version 1) or CSV, and reports every parameter
it resolved, including rule-of-thumb bandwidths. All numbers are emitted as
shortest round-trip decimals. Exit codes: 0 success, 1 runtime error (with
a machine-readable error JSON on stderr), 2 usage error.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .bandwidth import default_params, nr_bandwidth, rot_bandwidths
from .bootstrap import bootstrap_curves, confidence_band
from .bounds import load_level_set_csv, m_bound, theta_bound
from .errors import EmptyData, EmptyInterval, MissingColumn, NpdoseError, ParseError
from .estimators import estimate_all, m_RA_curve, m_theta_curve, theta_C_curve, theta_RA_curve
from .kernels import KernelKind
from .locpoly import Dataset, EstimParams
from .simdata import SIM_MODELS, generate

SCHEMA_VERSION = 1

_CURVE_FUNCS = {
    "m_theta": m_theta_curve,
    "m_RA": m_RA_curve,
    "theta_C": theta_C_curve,
    "theta_RA": theta_RA_curve,
}
_MODEL_ALIASES = {"single": "single_conf", "linear": "linear_conf", "nonlinear": "nonlinear_conf"}


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def load_csv(source, y_col="Y", t_col="T", s_cols=None, drop_bad=False):
    """Read a dataset from a CSV file path or text stream.

    Strict mode (default) rejects the whole file on the first row with a
    missing or non-finite cell, reporting its line number; ``drop_bad``
    instead drops such rows and counts them. ``s_cols=None`` takes every
    column other than the outcome and treatment, in header order.

    Returns:
        (Dataset, info) where info records the covariate column names and
        the number of dropped rows.
    """
    if hasattr(source, "read"):
        return _load_csv_stream(source, y_col, t_col, s_cols, drop_bad)
    with open(source, newline="", encoding="utf-8") as fh:
        return _load_csv_stream(fh, y_col, t_col, s_cols, drop_bad)


def _load_csv_stream(fh, y_col, t_col, s_cols, drop_bad):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyData("empty CSV: no header row") from None
    header = [c.strip() for c in header]
    if s_cols is None:
        s_cols = [c for c in header if c not in (y_col, t_col)]
    for col in [y_col, t_col, *s_cols]:
        if col not in header:
            raise MissingColumn(f"column {col!r} not found in header {header}")
    pos = [header.index(c) for c in (y_col, t_col, *s_cols)]
    rows, dropped = [], 0
    for lineno, cells in enumerate(reader, start=2):
        if not cells or all(not c.strip() for c in cells):
            continue
        try:
            vals = [float(cells[p]) for p in pos]
            if not all(np.isfinite(vals)):
                raise ValueError("non-finite value")
        except (ValueError, IndexError) as exc:
            if drop_bad:
                dropped += 1
                continue
            raise ParseError(f"line {lineno}: {exc}", line=lineno) from None
        rows.append(vals)
    if not rows:
        raise EmptyData("CSV contained no usable data rows")
    arr = np.asarray(rows, dtype=np.float64)
    data = Dataset(y=arr[:, 0], t=arr[:, 1], s=arr[:, 2:])
    return data, {"s_cols": list(s_cols), "dropped_rows": dropped}


def _write_dataset_csv(data: Dataset, out):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Y", "T", *[f"S{j + 1}" for j in range(data.d)]])
    for i in range(data.n):
        writer.writerow([repr(float(data.y[i])), repr(float(data.t[i])),
                         *[repr(float(v)) for v in data.s[i]]])


# ---------------------------------------------------------------------------
# Shared argument plumbing
# ---------------------------------------------------------------------------


def _add_io_args(sp):
    sp.add_argument("--input", default="-", help="input CSV path, or - for stdin")
    sp.add_argument("--y-col", default="Y")
    sp.add_argument("--t-col", default="T")
    sp.add_argument("--s-cols", default=None,
                    help="comma-separated covariate columns (default: all others)")
    sp.add_argument("--drop-bad", action="store_true",
                    help="drop unparseable rows instead of failing")
    sp.add_argument("--out", default="-", help="output path, or - for stdout")
    sp.add_argument("--format", choices=("json", "csv"), default="json")


def _add_param_args(sp):
    sp.add_argument("--q", type=int, default=2, help="local polynomial order")
    sp.add_argument("--h", type=float, default=None, help="treatment bandwidth override")
    sp.add_argument("--b", default=None, help="comma-separated covariate bandwidth override")
    sp.add_argument("--hbar", type=float, default=None, help="CDF bandwidth override")
    sp.add_argument("--Ch", type=float, default=10.0, help="rule-of-thumb scale for h")
    sp.add_argument("--Cb", type=float, default=15.0, help="rule-of-thumb scale for b")
    sp.add_argument("--scale-by-sd", action="store_true",
                    help="multiply rule-of-thumb bandwidths by column standard deviations")
    sp.add_argument("--kernel-t", default="epanechnikov")
    sp.add_argument("--kernel-s", default="epanechnikov")
    sp.add_argument("--kernel-cdf", default="gaussian")
    sp.add_argument("--trim-lo", type=float, default=0.0)
    sp.add_argument("--trim-hi", type=float, default=1.0)


def _add_boot_args(sp):
    sp.add_argument("--B", type=int, default=1000, help="bootstrap replicates")
    sp.add_argument("--alpha", type=float, default=0.05, help="significance level")
    sp.add_argument("--seed", type=int, default=None,
                    help="bootstrap seed (default: NPDOSE_SEED env var, else 0)")
    sp.add_argument("--jobs", type=int, default=None,
                    help="parallel workers (default: machine parallelism)")


def _resolve_seed(seed):
    if seed is not None:
        return int(seed)
    env = os.environ.get("NPDOSE_SEED")
    return int(env) if env else 0


def _resolve_params(args, data: Dataset) -> EstimParams:
    b = None
    if args.b is not None:
        b = [float(v) for v in args.b.split(",") if v.strip()]
        if len(b) != data.d:
            raise ValueError(f"--b needs {data.d} entries, got {len(b)}")
    params = default_params(
        data, C_h=args.Ch, C_b=args.Cb, q=args.q, scale_by_sd=args.scale_by_sd,
        trim_lo=args.trim_lo, trim_hi=args.trim_hi, h=args.h, b=b, hbar=args.hbar,
    )
    return dataclasses.replace(
        params,
        kernel_t=KernelKind.from_name(args.kernel_t),
        kernel_s=KernelKind.from_name(args.kernel_s),
        kernel_cdf=KernelKind.from_name(args.kernel_cdf),
    )


def _params_json(params: EstimParams) -> dict:
    return {
        "q": params.q,
        "h": params.h,
        "b": list(params.b),
        "hbar": params.hbar,
        "kernel_t": params.kernel_t.value,
        "kernel_s": params.kernel_s.value,
        "kernel_cdf": params.kernel_cdf.value,
        "trim_lo": params.trim_lo,
        "trim_hi": params.trim_hi,
    }


def _curve_json(curve) -> dict:
    return {
        "estimator": curve.estimator_tag,
        "grid": [float(v) for v in curve.grid],
        "values": [None if s else float(v) for v, s in zip(curve.values, curve.skipped)],
        "diagnostics": curve.diagnostics,
    }


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _emit(args, payload: dict, csv_rows=None, csv_header=None):
    out, close = _open_out(args.out)
    try:
        if getattr(args, "format", "json") == "csv" and csv_rows is not None:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(csv_header)
            for row in csv_rows:
                writer.writerow(["" if v is None else repr(float(v)) for v in row])
        else:
            json.dump(payload, out, indent=2)
            out.write("\n")
    finally:
        if close:
            out.close()


def _load_input(args):
    s_cols = None
    if args.s_cols is not None:
        s_cols = [c.strip() for c in args.s_cols.split(",") if c.strip()]
    if args.input == "-":
        return load_csv(sys.stdin, args.y_col, args.t_col, s_cols, args.drop_bad)
    return load_csv(args.input, args.y_col, args.t_col, s_cols, args.drop_bad)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    model = _MODEL_ALIASES.get(args.model, args.model)
    if model not in SIM_MODELS:
        raise ValueError(f"unknown model {args.model!r}")
    data = generate(model, args.n, _resolve_seed(args.seed))
    out, close = _open_out(args.out)
    try:
        _write_dataset_csv(data, out)
    finally:
        if close:
            out.close()
    return 0


def _estimate_like(args, which_choices, default_which) -> int:
    data, info = _load_input(args)
    params = _resolve_params(args, data)
    which = args.estimator or default_which
    if which not in which_choices:
        raise ValueError(f"estimator must be one of {which_choices}")
    wanted = list(which_choices[:-1]) if which == "both" else [which]

    if getattr(args, "bootstrap", False):
        if len(wanted) != 1:
            raise ValueError("--bootstrap needs a single estimator, not 'both'")
        if wanted[0] not in ("m_theta", "theta_C"):
            raise ValueError("bands are only defined for m_theta and theta_C")
        return _run_bootstrap(args, data, info, params, wanted[0])

    if len(wanted) > 1:
        all_curves = estimate_all(data, params)
        curves = [all_curves[w] for w in wanted]
    else:
        curves = [_CURVE_FUNCS[wanted[0]](data, params)]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "curves",
        "n": data.n,
        "d": data.d,
        "seed": None,
        "params": _params_json(params),
        "s_cols": info["s_cols"],
        "diagnostics": {"dropped_rows": info["dropped_rows"]},
        "curves": [_curve_json(c) for c in curves],
    }
    first = curves[0]
    rows = list(zip(first.grid, [None if s else v for v, s in zip(first.values, first.skipped)]))
    _emit(args, payload, csv_rows=rows, csv_header=["grid", "value"])
    return 0


def _cmd_estimate(args) -> int:
    return _estimate_like(args, ("m_theta", "m_RA", "both"), "m_theta")


def _cmd_derivative(args) -> int:
    return _estimate_like(args, ("theta_C", "theta_RA", "both"), "theta_C")


def _run_bootstrap(args, data, info, params, which) -> int:
    seed = _resolve_seed(getattr(args, "seed", None))
    result = bootstrap_curves(
        data, params, which=which, B=args.B, alpha=args.alpha, seed=seed, jobs=args.jobs
    )
    plo, phi = confidence_band(result, "pointwise")
    ulo, uhi = confidence_band(result, "uniform")
    base = result.base

    def _col(arr):
        return [None if not np.isfinite(v) else float(v) for v in arr]

    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "bootstrap",
        "estimator": base.estimator_tag,
        "n": data.n,
        "d": data.d,
        "seed": seed,
        "B": result.B,
        "alpha": result.alpha,
        "params": _params_json(params),
        "s_cols": info["s_cols"],
        "grid": [float(v) for v in base.grid],
        "values": _col(base.values),
        "pointwise_lo": _col(plo),
        "pointwise_hi": _col(phi),
        "uniform_lo": _col(ulo),
        "uniform_hi": _col(uhi),
        "uniform_halfwidth": float(result.uniform_halfwidth),
        "diagnostics": {
            "dropped_rows": info["dropped_rows"],
            "dropped_fits": base.diagnostics.get("dropped_fits", 0),
            "failed_replicates": result.n_failed,
        },
    }
    rows = list(zip(base.grid, _col(base.values), _col(plo), _col(phi), _col(ulo), _col(uhi)))
    _emit(args, payload, csv_rows=rows,
          csv_header=["grid", "value", "pointwise_lo", "pointwise_hi", "uniform_lo", "uniform_hi"])
    return 0


def _cmd_bootstrap(args) -> int:
    data, info = _load_input(args)
    params = _resolve_params(args, data)
    return _run_bootstrap(args, data, info, params, args.which)


def _cmd_bandwidth(args) -> int:
    data, info = _load_input(args)
    h, b = rot_bandwidths(data, C_h=args.Ch, C_b=args.Cb, scale_by_sd=args.scale_by_sd)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "bandwidth",
        "n": data.n,
        "d": data.d,
        "s_cols": info["s_cols"],
        "Ch": args.Ch,
        "Cb": args.Cb,
        "scale_by_sd": bool(args.scale_by_sd),
        "h_rot": float(h),
        "b_rot": [float(v) for v in b],
        "hbar_nr": float(nr_bandwidth(data.t)),
    }
    _emit(args, payload)
    return 0


def _cmd_bounds(args) -> int:
    if args.rho1 is None and args.rho2 is None:
        raise ValueError("bounds needs --rho1 and/or --rho2")
    sample = load_level_set_csv(args.input)
    payload = {"schema_version": SCHEMA_VERSION, "kind": "bounds", "empty": False}
    try:
        if args.rho1 is not None:
            m_lo, m_hi = m_bound(sample, args.rho1)
            payload.update(m_lo=m_lo, m_hi=m_hi, rho1=args.rho1)
        if args.rho2 is not None:
            t_lo, t_hi = theta_bound(sample, args.rho2)
            payload.update(theta_lo=t_lo, theta_hi=t_hi, rho2=args.rho2)
    except EmptyInterval as exc:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": "bounds",
            "empty": True,
            "message": str(exc),
        }
    _emit(args, payload)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npdose",
        description="Dose-response curve and derivative estimation without positivity",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a benchmark dataset as CSV")
    sp.add_argument("--model", required=True,
                    choices=sorted(set(_MODEL_ALIASES) | set(SIM_MODELS)))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("estimate", help="dose-response curve estimates")
    _add_io_args(sp)
    _add_param_args(sp)
    sp.add_argument("--estimator", choices=("m_theta", "m_RA", "both"), default=None)
    sp.add_argument("--bootstrap", action="store_true", help="attach bootstrap bands")
    _add_boot_args(sp)
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("derivative", help="derivative curve estimates")
    _add_io_args(sp)
    _add_param_args(sp)
    sp.add_argument("--estimator", choices=("theta_C", "theta_RA", "both"), default=None)
    sp.add_argument("--bootstrap", action="store_true", help="attach bootstrap bands")
    _add_boot_args(sp)
    sp.set_defaults(func=_cmd_derivative)

    sp = sub.add_parser("bootstrap", help="curve plus pointwise and uniform bands")
    _add_io_args(sp)
    _add_param_args(sp)
    sp.add_argument("--which", choices=("m_theta", "theta_C"), default="m_theta")
    _add_boot_args(sp)
    sp.set_defaults(func=_cmd_bootstrap)

    sp = sub.add_parser("bandwidth", help="print rule-of-thumb bandwidths")
    _add_io_args(sp)
    sp.add_argument("--Ch", type=float, default=10.0)
    sp.add_argument("--Cb", type=float, default=15.0)
    sp.add_argument("--scale-by-sd", action="store_true")
    sp.set_defaults(func=_cmd_bandwidth)

    sp = sub.add_parser("bounds", help="partial-identification bounds from a level-set CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--rho1", type=float, default=None)
    sp.add_argument("--rho2", type=float, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=_cmd_bounds)

    return parser


def main(argv=None) -> int:
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NpdoseError, ValueError, OSError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ParseError) and exc.line is not None:
            error["line"] = exc.line
        json.dump(error, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
