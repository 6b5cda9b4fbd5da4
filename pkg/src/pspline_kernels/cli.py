"""Command-line front end.

Subcommands: ``fit``, ``kernel``, ``boundary``, ``certify`` and ``simulate``.
Tables are written as CSV with 17 significant digits (or JSON with
``--format json``) to ``--out`` or stdout. When a command produces more than
one table, the first goes to ``--out`` and each further table to
``<stem>.<name>.csv`` beside it. Relative ``--out`` paths are resolved
against ``$PSPLINE_KERNELS_OUTPUT_DIR`` when that variable is set.

Exit codes: 0 success, 1 I/O error, 2 usage or validation error,
3 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import (
    BETA_STAR,
    assemble_boundary_system,
    boundary_kernel,
    finite_sample_kernel_m2,
)
from .exceptions import (
    ConfigurationError,
    DimensionError,
    DomainError,
    InvalidOrderError,
    SingularSystemError,
    SmallBetaWarning,
    UnsupportedError,
)
from .fit import FitConfig, fit, normal_equation_residual
from .kernel import (
    MAX_ORDER,
    check_mode_equation,
    defining_conditions_hold,
    eigen_components,
    kernel_moment,
    kernel_profile,
    orthogonality_residual,
    solve_kernel_coefficients,
)
from .penalty import check_cm_identity, check_omega_rows

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_CERTIFY = 0, 1, 2, 3
OUTPUT_DIR_ENV = "PSPLINE_KERNELS_OUTPUT_DIR"
MOMENT_TOL = 1e-8
IDENTITY_TOL = 1e-12
CONDITION_LIMIT = 1e6


class UsageError(Exception):
    """Invalid flag values detected after argument parsing."""


# output helpers


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _resolve_out(out: str | None) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _write_text(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit_tables(tables, args, comments=(), extra_json=None) -> None:
    """Write ``tables`` (list of ``(name, header, rows)``) in the requested format."""
    path = _resolve_out(args.out)
    if args.format == "json":
        doc = {name: [dict(zip(header, (_jsonable(v) for v in row))) for row in rows] for name, header, rows in tables}
        if extra_json:
            doc.update(extra_json)
        _write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", path)
        return
    (name0, header0, rows0), rest = tables[0], tables[1:]
    if path is None:
        parts = [_csv_text(header0, rows0, comments)]
        for name, header, rows in rest:
            parts.append(_csv_text(header, rows, [f"table {name}"]))
        sys.stdout.write("\n".join(parts))
        return
    _write_text(_csv_text(header0, rows0, comments), path)
    for name, header, rows in rest:
        _write_text(_csv_text(header, rows), path.with_name(f"{path.stem}.{name}.csv"))


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


# fit


def read_data(path: str):
    """Read a one-column (y) or two-column (t, y) CSV; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row if v.strip() != ""])
            except ValueError:
                if rows:
                    raise UsageError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if not rows:
        raise UsageError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if widths not in ({1}, {2}):
        raise UsageError(f"{path}: expected one column (y) or two columns (t, y), got widths {sorted(widths)}")
    data = np.array(rows)
    n = data.shape[0]
    if data.shape[1] == 1:
        return np.arange(1, n + 1) / n, data[:, 0]
    t, y = data[:, 0], data[:, 1]
    if np.any(t < 0) or np.any(t > 1):
        raise UsageError(f"{path}: t values must lie in [0, 1]")
    if np.max(np.abs(t - np.arange(1, n + 1) / n)) > 1e-9:
        raise UsageError(f"{path}: t must be the equally spaced design i/n, i = 1..n")
    return t, y


def cmd_fit(args) -> int:
    out = _resolve_out(args.out)
    if out is not None and out.resolve() == Path(args.data).resolve():
        raise UsageError("--out must not overwrite the input data file")
    _, y = read_data(args.data)
    try:
        cfg = FitConfig(len(y), args.kn, args.p, args.m, args.lam)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    if cfg.lambda_star == 0 and cfg.dim > cfg.n:
        raise UsageError(f"lambda 0 needs K + p <= n, got {cfg.dim} > {cfg.n}")
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    result = fit(y, cfg)
    grid = np.linspace(0.0, 1.0, args.grid)
    fitted = result(grid)
    comments = [
        f"n={cfg.n} K={cfg.num_intervals} p={cfg.degree} m={cfg.penalty_order} lambda_star={_fmt(cfg.lambda_star)}",
        f"alpha={_fmt(cfg.alpha)} beta={_fmt(cfg.beta)} M_n={cfg.obs_per_interval}",
    ]
    _info(comments[1])
    residual = normal_equation_residual(result, y)
    if residual > 1e-8:
        _info(f"warning: normal-equation residual {residual:.3g}")
    tables = [
        ("fitted", ["t", "fitted"], list(zip(grid, fitted))),
        ("coefficients", ["index", "coefficient"], list(zip(range(1, cfg.dim + 1), result.coeffs))),
    ]
    _emit_tables(tables, args, comments, {"alpha": cfg.alpha, "beta": _jsonable(cfg.beta), "M_n": cfg.obs_per_interval})
    return EXIT_OK


# kernel


def moment_certificate(m: int):
    spec = solve_kernel_coefficients(m)
    rows = []
    for order in range(2 * m):
        value = kernel_moment(spec, order)
        expected = 1.0 if order == 0 else 0.0
        rows.append((order, value, expected, abs(value - expected), abs(value - expected) <= MOMENT_TOL))
    return rows


def cmd_kernel(args) -> int:
    if not 1 <= args.m <= MAX_ORDER:
        raise UsageError(f"--m must be in 1..{MAX_ORDER}")
    if not args.beta > 0 or args.points < 2:
        raise UsageError("--beta must be positive and --points at least 2")
    spec = solve_kernel_coefficients(args.m)
    half = args.half_width
    if half is None:
        half = 30.0 / (args.beta * eigen_components(args.m).slowest_decay)
    tau = np.linspace(-half, half, args.points)
    values = kernel_profile(spec, args.beta, tau)
    tables = [("kernel", ["tau", "kernel"], list(zip(tau, values)))]
    comments = [f"m={args.m} beta={_fmt(args.beta)} coefficients={_fmt_list(spec.as_vector())}"]
    ok = True
    extra = {}
    if args.moments:
        cert = moment_certificate(args.m)
        ok = all(r[-1] for r in cert)
        header = ["order", "moment", "expected", "abs_error", "pass"]
        if args.format == "json":
            tables.append(("moments", header, cert))
        else:
            comments += ["moments: " + ",".join(header)] + ["moment," + ",".join(_fmt(v) for v in r) for r in cert]
        extra["moments_pass"] = ok
    _emit_tables(tables, args, comments, extra)
    if not ok:
        _info("moment certificate FAILED")
        return EXIT_CERTIFY
    return EXIT_OK


def _fmt_list(values) -> str:
    return "[" + " ".join(_fmt(float(v)) for v in values) + "]"


# boundary


def cmd_boundary(args) -> int:
    if not 1 <= args.m <= MAX_ORDER:
        raise UsageError(f"--m must be in 1..{MAX_ORDER}")
    if args.finite_sample and args.m != 2:
        raise UsageError("--finite-sample is available for --m 2 only")
    if not args.beta >= 1:
        raise UsageError("--beta must be at least 1")
    if not 0 <= args.t <= 1:
        raise UsageError("--t must lie in [0, 1]")
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    if args.beta < BETA_STAR:
        _info(f"warning: beta={args.beta} is below {BETA_STAR}; boundary kernels may be inaccurate")
    spec = solve_kernel_coefficients(args.m)
    s = np.linspace(0.0, 1.0, args.points)
    interior = kernel_profile(spec, args.beta, args.t - s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallBetaWarning)
        kb = boundary_kernel(args.m, args.beta, args.t, s, side=args.side)
    header = ["s", "interior", "boundary"]
    cols = [s, interior, kb]
    if args.finite_sample:
        header.append("finite_sample")
        cols.append(finite_sample_kernel_m2(args.beta, args.t, s))
    _emit_tables(
        [("boundary", header, list(zip(*cols)))],
        args,
        [f"m={args.m} beta={_fmt(args.beta)} t={_fmt(args.t)} side={args.side}"],
    )
    return EXIT_OK


# certify


def certification_checks(m: int, beta: float = 10.0, seed: int = 0):
    """Run every structural identity for order ``m``; yields ``(name, passed, detail)``."""
    dim = 2 * m + 6
    for k in range(m + 1):
        yield f"difference_rows_k{k}", check_omega_rows(m, k, dim), f"dim={dim}"
    rng = np.random.default_rng(seed)
    cm_ok = all(check_cm_identity(m, dim, rng.standard_normal(dim)) for _ in range(100))
    yield "cumsum_difference_identity", cm_ok, "100 random vectors, tol 1e-10"
    res = orthogonality_residual(m)
    yield "coefficient_orthogonality", res <= IDENTITY_TOL, f"residual={res:.3g}"
    yield "mode_equation", check_mode_equation(m), "each mode solves the homogeneous equation"
    spec = solve_kernel_coefficients(m)
    A = np.linalg.norm(spec.as_vector())
    yield "defining_conditions", defining_conditions_hold(spec, beta), f"beta={beta}, |coeffs|={A:.3g}"
    cert = moment_certificate(m)
    worst = max(r[3] for r in cert)
    yield "moments", all(r[-1] for r in cert), f"orders 0..{2 * m - 1}, max error {worst:.3g}"
    system = assemble_boundary_system(m, beta)
    c11, c22 = np.linalg.cond(system.B11), np.linalg.cond(system.B22)
    yield "boundary_blocks_invertible", max(c11, c22) < CONDITION_LIMIT, f"cond(B11)={c11:.3g} cond(B22)={c22:.3g}"


def cmd_certify(args) -> int:
    if not 1 <= args.m <= MAX_ORDER:
        raise UsageError(f"--m must be in 1..{MAX_ORDER}")
    results = list(certification_checks(args.m, args.beta))
    rows = [(name, "PASS" if ok else "FAIL", detail) for name, ok, detail in results]
    if args.out is None and args.format == "csv":
        for name, status, detail in rows:
            print(f"{status} {name}: {detail}")
    else:
        _emit_tables([("certificate", ["identity", "status", "detail"], rows)], args, [f"m={args.m}"])
    if all(ok for _, ok, _ in results):
        return EXIT_OK
    _info(f"certification failed for m={args.m}")
    return EXIT_CERTIFY


# simulate


def cmd_simulate(args) -> int:
    from .lab.scenario import SimScenario, shipped_scenario
    from .lab.studies import run_study

    if (args.scenario is None) == (args.name is None):
        raise UsageError("give exactly one of --scenario and --name")
    try:
        scenario = SimScenario.from_json(args.scenario) if args.scenario else shipped_scenario(args.name)
        scenario = scenario.with_updates(seed=args.seed)
        if args.replications is not None:
            scenario = scenario.with_updates(replications=args.replications)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    report = run_study(scenario, workers=args.workers)
    path = _resolve_out(args.out)
    if args.format == "json":
        _write_text(report.to_json() + "\n", path)
        return EXIT_OK
    comments = [f"{k}={_fmt(v)}" for k, v in sorted(report.summary.items())]
    tables = []
    if report.per_point:
        names, rows = report.point_table()
        tables.append(("points", names, rows))
    if report.per_size:
        keys = list(report.per_size[0])
        tables.append(("sizes", keys, [[r[k] for k in keys] for r in report.per_size]))
    _emit_tables(tables, args, comments)
    return EXIT_OK


# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pspline-kernels", description="P-spline fits and their equivalent kernels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default="csv"):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=default)

    p = sub.add_parser("fit", help="fit a P-spline to a data file")
    p.add_argument("--data", required=True, help="CSV with columns y or t,y")
    p.add_argument("--kn", type=int, required=True, help="number of knot intervals")
    p.add_argument("--p", type=int, default=3, help="spline degree")
    p.add_argument("--m", type=int, default=2, help="difference penalty order")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="penalty weight lambda*")
    p.add_argument("--grid", type=int, default=101, help="number of output grid points")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("kernel", help="tabulate the interior equivalent kernel")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--half-width", type=float, default=None, help="table covers [-T, T]")
    p.add_argument("--moments", action="store_true", help="append the moment certificate")
    common(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("boundary", help="tabulate the boundary kernel at one t")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--points", type=int, default=501)
    p.add_argument("--side", choices=("left", "right", "auto"), default="left")
    p.add_argument("--finite-sample", action="store_true", help="add the two-boundary m=2 kernel")
    common(p)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("certify", help="check the structural identities for one order")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--beta", type=float, default=10.0)
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="run a Monte Carlo study")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--name", help="name of a shipped scenario")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--replications", type=int, default=None, help="override the scenario's count")
    common(p, default="json")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, InvalidOrderError, UnsupportedError, DomainError,
            DimensionError, SingularSystemError) as exc:
        _info(f"error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _info(f"I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
