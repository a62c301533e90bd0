"""Command-line entry point: ``dgp-dynamics <command> [flags]``.

Every command writes its data file (CSV, or JSON for ``classify``) under
``--out`` together with an adjacent ``.json`` manifest holding the full
configuration, seed, tool version and wall time.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .kernels import KernelSpec
from .recurrence import RecurrenceMap, fixed_points, initial_u_from_inputs, trajectory
from .scan import AxisSpec, KernelFamily, LogisticFamily, bifurcation_scan, contour_scan, se_dim_threshold
from .simulator import MeanMode, SimConfig, estimate_mean_z, rmsd_trace

THREADS_ENV = "DGP_DYNAMICS_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _points(text: str) -> np.ndarray:
    """``"0,1"`` is two 1-d points; ``"0,0;1,2"`` is two 2-d points."""
    try:
        if ";" in text:
            pts = [[float(v) for v in chunk.split(",")] for chunk in text.split(";")]
        else:
            pts = [[float(v)] for v in text.split(",")]
        return np.array(pts, dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse points {text!r}: {exc}") from None


def _axis(text: str) -> AxisSpec:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigurationError(f"axis must look like NAME:LO:HI:N, got {text!r}")
    name, lo, hi, n = parts
    try:
        lo_f, hi_f, n_i = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigurationError(f"bad numbers in axis {text!r}") from None
    if n_i < 1:
        raise ConfigurationError("axis needs at least one point")
    if name == "m":
        return AxisSpec("m", tuple(np.unique(np.round(np.linspace(lo_f, hi_f, n_i)))))
    return AxisSpec.linspace(name, lo_f, hi_f, n_i)


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _add_kernel_flags(p: argparse.ArgumentParser, kernel_required: bool = True):
    p.add_argument("--kernel", required=kernel_required, default="se",
                   help="se, cos, per, rq, sm or matern32")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--ell2", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.0, help="period (COS, PER)")
    p.add_argument("--alpha", type=float, default=1.0, help="RQ shape")
    p.add_argument("--mu", type=float, default=1.0, help="SM frequency")
    p.add_argument("--m", type=int, default=1, help="layer width")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--name", default=None, help="output file stem (defaults to the command)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default ${THREADS_ENV} or 1)")


def _kernel(args) -> KernelSpec:
    return KernelSpec(args.kernel, sigma2=args.sigma2, ell2=args.ell2, p=args.p,
                      alpha=args.alpha, mu=args.mu)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dgp-dynamics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("trajectory", help="iterate a recurrence map")
    _add_kernel_flags(p)
    p.add_argument("--c", type=float, default=0.0, help="input-connection constant")
    p.add_argument("--u0", type=float, default=None)
    p.add_argument("--pair", default=None, help="input pair, e.g. '0,1' (instead of --u0)")
    p.add_argument("--n", type=int, default=300, help="maximum iterations")
    p.add_argument("--tol", type=float, default=1e-12)
    _add_common(p)

    p = sub.add_parser("scan", help="bifurcation or contour scan")
    p.add_argument("--mode", choices=("bifurcation", "contour", "threshold"), default="contour")
    p.add_argument("--family", choices=("kernel", "logistic"), default="kernel")
    _add_kernel_flags(p, kernel_required=False)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--axis", action="append", type=_axis, default=[],
                   help="NAME:LO:HI:N; give one for bifurcation, two for contour")
    p.add_argument("--u0", type=float, default=None, help="start value (1.0; 0.5 for logistic)")
    p.add_argument("--n", type=int, default=300, help="iterations per contour cell")
    p.add_argument("--burn-in", type=int, default=300)
    p.add_argument("--record", type=int, default=50)
    p.add_argument("--no-classify", action="store_true")
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo E[Z_n] against the recurrence")
    _add_kernel_flags(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--inputs", type=_points, required=True)
    p.add_argument("--pair", default="0,1", help="indices of the input pair")
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mean", choices=("zero", "linear"), default="zero")
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--input-connect", action="store_true")
    _add_common(p)

    p = sub.add_parser("rmsd", help="RMSD traces through a deep GP prior")
    _add_kernel_flags(p, kernel_required=False)
    p.add_argument("--ratio", type=float, default=None,
                   help="SE with sigma2=1 and ell2=1/ratio (overrides kernel flags)")
    p.add_argument("--layers", type=int, default=100)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--ndata", type=int, default=100, help="inputs drawn uniformly in (-5, 5)")
    p.add_argument("--inputs", type=_points, default=None, help="explicit inputs instead of --ndata")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--input-connect", action="store_true")
    _add_common(p)

    p = sub.add_parser("classify", help="fixed points and pathology class as JSON")
    _add_kernel_flags(p)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--u-max", type=float, default=None)
    _add_common(p)
    return parser


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(path: Path, command: str, config: dict, seed, wall: float, outputs,
                   argv=None) -> None:
    manifest = {
        "command": command,
        "argv": list(argv) if argv is not None else None,
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time_s": wall,
        "outputs": [Path(o).name for o in outputs],
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _config(args) -> dict:
    skip = {"out", "name", "threads"}
    out = {}
    for k, v in vars(args).items():
        if k in skip:
            continue
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, list):
            v = [{"parameter": a.parameter, "values": list(a.values)} if isinstance(a, AxisSpec)
                 else a for a in v]
        out[k] = v
    return out


# --------------------------------------------------------------------------
# commands


def cmd_trajectory(args, threads):
    kernel = _kernel(args)
    rmap = RecurrenceMap(kernel, args.m, args.c)
    if args.pair is not None:
        pts = _points(args.pair)
        if len(pts) != 2:
            raise ConfigurationError("--pair needs exactly two points")
        u0 = initial_u_from_inputs(rmap, pts[0], pts[1])
    elif args.u0 is not None:
        u0 = args.u0
    else:
        raise ConfigurationError("give --u0 or --pair")
    traj = trajectory(rmap, u0, n_max=args.n, tol=args.tol)
    rows = list(enumerate(traj.values.tolist()))
    extra = {"converged": traj.converged, "limit_estimate": traj.limit_estimate,
             "iterations_to_tolerance": traj.iterations_to_tolerance, "u0": u0}
    return ["n", "u_n"], rows, extra, None


def cmd_scan(args, threads):
    if args.family == "logistic":
        family = LogisticFamily()
        u0 = 0.5 if args.u0 is None else args.u0
    else:
        family = KernelFamily(_kernel(args), args.m, args.c)
        u0 = 1.0 if args.u0 is None else args.u0
    if args.mode == "bifurcation":
        if len(args.axis) != 1:
            raise ConfigurationError("bifurcation mode needs exactly one --axis")
        res = bifurcation_scan(family, args.axis[0], u0=u0, burn_in=args.burn_in,
                               record=args.record, workers=threads)
        rows = []
        for cell in res.cells:
            (val,) = cell.params.values()
            if cell.error:
                rows.append((val, 0, float("nan")))
            for i, v in enumerate(cell.asymptotic_values):
                rows.append((val, i, v))
        header = ["param", "iterate_index", "value"]
    else:
        if len(args.axis) != 2:
            raise ConfigurationError(f"{args.mode} mode needs exactly two --axis flags")
        if args.mode == "threshold":
            by_name = {a.parameter: a for a in args.axis}
            if "m" not in by_name or len(by_name) != 2:
                raise ConfigurationError("threshold mode needs an m axis and an ell2 (ratio) axis")
            ratio = next(a for a in args.axis if a.parameter != "m")
            res = se_dim_threshold(by_name["m"], ratio, n=args.n, u0=u0, workers=threads)
        else:
            if args.family == "logistic":
                raise ConfigurationError("the logistic family only supports bifurcation mode")
            res = contour_scan(family, args.axis[0], args.axis[1], u0=u0, n=args.n,
                               classify_cells=not args.no_classify, workers=threads)
        rows = []
        for cell in res.cells:
            a, b = cell.params.values()
            val = cell.asymptotic_values[0] if cell.asymptotic_values else float("nan")
            cls = "ERROR" if cell.error else (cell.classification or "")
            rows.append((a, b, val, cls))
        header = ["p1", "p2", "u_final", "classification"]
    errors = [{"params": c.params, "error": c.error} for c in res.cells if c.error]
    extra = {"axes": [a.parameter for a in res.axes], "n_cells": len(res.cells),
             "failed_cells": errors, "u0": u0}
    return header, rows, extra, None


def _mean_mode(args) -> MeanMode:
    return MeanMode.linear(args.slope) if args.mean == "linear" else MeanMode.zero()


def cmd_simulate(args, threads):
    cfg = SimConfig(_kernel(args), args.m, args.depth, args.inputs, args.reps, args.seed,
                    _mean_mode(args), args.input_connect)
    try:
        i, j = (int(v) for v in args.pair.split(","))
    except ValueError:
        raise ConfigurationError("--pair must be two comma-separated indices") from None
    stats = estimate_mean_z(cfg, i, j, workers=threads)
    rows = [(s.layer, s.empirical_mean_z, s.std_error, s.predicted_u) for s in stats]
    extra = {"sim_config": cfg.to_dict(), "degenerate_std_error": args.reps == 1}
    return ["layer", "empirical_mean", "std_error", "predicted_u"], rows, extra, args.seed


def cmd_rmsd(args, threads):
    if args.ratio is not None:
        if not args.ratio > 0:
            raise ConfigurationError("--ratio must be > 0")
        kernel = KernelSpec("SE", sigma2=1.0, ell2=1.0 / args.ratio)
    else:
        kernel = _kernel(args)
    if args.inputs is not None:
        inputs = args.inputs
    else:
        if args.ndata < 2:
            raise ConfigurationError("--ndata must be >= 2")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([args.seed, 2**31])))
        inputs = rng.uniform(-5.0, 5.0, size=(args.ndata, 1))
    cfg = SimConfig(kernel, args.m, args.layers, inputs, args.reps, args.seed,
                    MeanMode.zero(), args.input_connect)
    trace = rmsd_trace(cfg, workers=threads)
    rows = [(n, r, trace[r, n]) for r in range(trace.shape[0]) for n in range(trace.shape[1])]
    medians = np.median(trace, axis=0)
    extra = {"sim_config": cfg.to_dict(), "median_rmsd_final": float(medians[-1])}
    return ["layer", "replication", "rmsd"], rows, extra, args.seed


def cmd_classify(args, threads):
    rmap = RecurrenceMap(_kernel(args), args.m, args.c)
    report = fixed_points(rmap, u_max=args.u_max)
    return None, report.to_dict(), {}, None


COMMANDS = {
    "trajectory": cmd_trajectory,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "rmsd": cmd_rmsd,
    "classify": cmd_classify,
}


def run(argv=None) -> int:
    start = time.perf_counter()
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1:
        raise ConfigurationError("--threads must be >= 1")
    header, payload, extra, seed = COMMANDS[args.command](args, threads)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.name or args.command
    if header is None:
        data_path = out_dir / f"{stem}.json"
        data_path.write_text(json.dumps(payload, indent=2) + "\n")
        manifest_path = out_dir / f"{stem}.manifest.json"
        print(json.dumps(payload, indent=2))
    else:
        data_path = out_dir / f"{stem}.csv"
        write_csv(data_path, header, payload)
        manifest_path = out_dir / f"{stem}.json"
        print(f"wrote {data_path} ({len(payload)} rows)")
    config = _config(args)
    config.update(extra)
    write_manifest(manifest_path, args.command, config, seed,
                   time.perf_counter() - start, [data_path], argv)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_CONFIG
    except ValueError as exc:  # ConfigurationError and DomainError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:  # NumericalFailure and friends
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
