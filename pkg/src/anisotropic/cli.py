"""Command-line front end: ``anisotropic --command check --config scenario.json``.

Exit codes: 0 success (for ``check``: every non-informational property passed),
1 some check failed, 2 configuration/schema error, 3 domain or degeneracy error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3, 4
COMMANDS = ("eval", "geodesic", "jacobi", "lie", "check")


def _configure_xla():
    # lower backend optimisation: compile time dominates at these problem sizes
    if "XLA_FLAGS" not in os.environ:
        os.environ["XLA_FLAGS"] = "--xla_backend_optimization_level=0"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def _index_names(prefix, rank, n):
    if rank == 0:
        return [prefix]
    return [prefix + "_" + "_".join(str(i + 1) for i in idx) for idx in np.ndindex(*(n,) * rank)]


class Table:
    """Ordered rows with fixed columns, written as CSV behind a ``#`` header."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows: list = []
        self.footer: list = []

    def add(self, values):
        values = list(values)
        if len(values) != len(self.columns):
            raise ValueError("row length does not match the columns")
        self.rows.append(values)

    def render(self, meta: dict) -> str:
        out = io.StringIO()
        for k, v in meta.items():
            out.write(f"# {k}: {v}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(fmt(v) for v in row) + "\n")
        for line in self.footer:
            out.write(f"# {line}\n")
        return out.getvalue()


def _flat(arr):
    return list(np.asarray(arr, dtype=float).reshape(-1))


def _map(fn, items, jobs):
    from .errors import DegeneracyError, DomainError

    def named(item):
        try:
            return fn(item)
        except (DomainError, DegeneracyError) as exc:
            raise type(exc)(f"sample {item[0]} (x={_flat(item[1].x)}, v={_flat(item[1].v)}): {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(named, items))
    return [named(i) for i in items]


# ---------------------------------------------------------------------------
# commands


EVAL_FIELDS = [
    ("L", 0, "L"),
    ("g", 2, "g"),
    ("C", 3, "C"),
    ("G", 1, "G"),
    ("N", 2, "N"),
    ("GammaB", 3, "gamma_berwald"),
    ("GammaC", 3, "gamma_chern"),
    ("P", 4, "P"),
    ("B", 4, "B"),
    ("R", 4, "R"),
]


def cmd_eval(sc, args):
    from . import checks

    n = sc.dim
    cols = ["index"] + _index_names("x", 1, n) + _index_names("v", 1, n)
    for prefix, rank, _ in EVAL_FIELDS:
        cols += _index_names(prefix, rank, n)
    cols += _index_names("Landsberg", 3, n)

    def row(item):
        k, s = item
        b = checks.bundle(sc.metric, s)
        vals = [k] + _flat(s.x) + _flat(s.v)
        for _, _, key in EVAL_FIELDS:
            vals += _flat(b[key])
        vals += _flat(np.einsum("lijk,lm,m->ijk", b["B"], b["g"], s.v))
        return vals

    table = Table(cols)
    for vals in _map(row, list(enumerate(sc.samples)), args.jobs):
        table.add(vals)
    return table, EXIT_OK


def _times(block, default_span=(0.0, 1.0)):
    span = block.get("t_span", list(default_span))
    return np.linspace(span[0], span[1], int(block.get("n_out", 11))), (float(span[0]), float(span[1]))


def cmd_geodesic(sc, args):
    from . import connections, finsler, spray

    block = sc.block("geodesic")
    if block is None:
        raise _config_error(sc, "command 'geodesic' needs a 'geodesic' block")
    n = sc.dim
    ts, span = _times(block)
    x0 = _vec(sc, block["x0"], "geodesic/x0")
    v0 = _vec(sc, block["v0"], "geodesic/v0")
    which = block.get("connection", "spray")
    tol = sc.tolerances["integration"]
    if which == "spray":
        curve = spray.integrate_geodesic(spray.spray_from_metric(sc.metric), x0, v0, span, tol)
    else:
        make = connections.chern_connection if which == "chern" else lambda m: connections.berwald_connection(spray.spray_from_metric(m))
        curve = connections.connection_geodesic(make(sc.metric), x0, v0, span, tol)
    table = Table(["t"] + _index_names("x", 1, n) + _index_names("v", 1, n) + ["L"])
    for t in ts:
        if curve.exited and t > curve.exit_time:
            break
        x, v = curve.position(t), curve.velocity(t)
        table.add([t] + _flat(x) + _flat(v) + [finsler.evaluate_L(sc.metric, x, v)])
    if curve.exited:
        t = curve.exit_time
        x, v = curve.position(t), curve.velocity(t)
        table.add([t] + _flat(x) + _flat(v) + [finsler.evaluate_L(sc.metric, x, v)])
        table.footer.append(f"exited: 1, exit_time: {fmt(t)}")
    else:
        table.footer.append("exited: 0")
    return table, EXIT_OK


def cmd_jacobi(sc, args):
    from . import connections, curvature, spray

    block = sc.block("jacobi")
    if block is None:
        raise _config_error(sc, "command 'jacobi' needs a 'jacobi' block")
    n = sc.dim
    ts, span = _times(block)
    tol = sc.tolerances["integration"]
    if block.get("connection", "chern") == "chern":
        conn = connections.chern_connection(sc.metric)
    else:
        conn = connections.berwald_connection(spray.spray_from_metric(sc.metric))
    x0 = _vec(sc, block["x0"], "jacobi/x0")
    v0 = _vec(sc, block["v0"], "jacobi/v0")
    geo = connections.connection_geodesic(conn, x0, v0, span, tol)
    span = (span[0], geo.exit_time) if geo.exited else span
    J = curvature.integrate_jacobi(conn, geo, _vec(sc, block["J0"], "jacobi/J0"), _vec(sc, block["J0dot"], "jacobi/J0dot"), span, tol)
    table = Table(["t"] + _index_names("x", 1, n) + _index_names("J", 1, n) + _index_names("DJ", 1, n) + ["normJ"])
    for t in ts:
        if t > J.t[-1] + 1e-12:
            break
        table.add([t] + _flat(J.geodesic.position(t)) + _flat(J.at(t)) + _flat(J.covariant_rate(t)) + [J.norm(sc.metric, t)])
    return table, EXIT_OK


def cmd_lie(sc, args):
    from . import config, lie

    block = sc.block("lie")
    if block is None:
        raise _config_error(sc, "command 'lie' needs a 'lie' block")
    n = sc.dim
    X = config.build_field(block["field"], n, sc.source)
    cols = ["index"] + _index_names("x", 1, n) + _index_names("v", 1, n) + ["LieL", "LieL_engine"] + _index_names("Lieg", 2, n)

    def row(item):
        k, s = item
        return (
            [k] + _flat(s.x) + _flat(s.v)
            + [lie.lie_derivative_metric(X, sc.metric, s), lie.lie_derivative_metric(X, sc.metric, s, route="engine")]
            + _flat(lie.lie_derivative_fundamental(X, sc.metric, s))
        )  # fmt: skip

    table = Table(cols)
    for vals in _map(row, list(enumerate(sc.samples)), args.jobs):
        table.add(vals)
    rep = lie.killing_check(X, sc.metric, sc.samples, threshold=block.get("threshold", 1e-7))
    factor = "none" if rep.conformal_factor is None else fmt(rep.conformal_factor)
    table.footer.append(
        f"killing: max_residual={fmt(rep.max_residual)} threshold={fmt(rep.threshold)} "
        f"is_killing={fmt(rep.is_killing)} is_conformal={fmt(rep.is_conformal)} "
        f"conformal_factor={factor} max_spread={fmt(rep.max_spread)}"
    )
    return table, EXIT_OK


def cmd_check(sc, args):
    from . import checks

    block = sc.block("check") or {}
    results = checks.run_suite(
        sc.metric,
        sc.samples,
        properties=block.get("properties"),
        extension_seeds=tuple(block.get("extension_seeds", (1, 2))),
        tolerance=sc.tolerances.get("suite"),
        jobs=args.jobs,
    )
    table = Table(["property", "samples", "max_residual", "tolerance", "status"])
    for r in results:
        table.add([r.name, r.samples, r.max_residual, r.tolerance, r.status])
    failed = [r.name for r in results if r.status == "fail"]
    table.footer.append(f"failed: {len(failed)}" + (f" ({', '.join(failed)})" if failed else ""))
    return table, EXIT_FAILED if failed else EXIT_OK


HANDLERS = {"eval": cmd_eval, "geodesic": cmd_geodesic, "jacobi": cmd_jacobi, "lie": cmd_lie, "check": cmd_check}


# ---------------------------------------------------------------------------
# entry point


def _config_error(sc, msg):
    from .errors import ConfigError

    return ConfigError(f"{sc.source}: {msg}")


def _vec(sc, values, where):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (sc.dim,):
        raise _config_error(sc, f"field {where}: expected {sc.dim} components")
    return arr


def build_parser():
    p = argparse.ArgumentParser(prog="anisotropic", description="Anisotropic tensor calculus for pseudo-Finsler metrics.")
    p.add_argument("command_pos", nargs="?", choices=COMMANDS, metavar="COMMAND", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--command", choices=COMMANDS, help="command to run (alternative to the positional form)")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--output", help="CSV output path (default: stdout)")
    p.add_argument("--tol", type=float, help="override the integration tolerance")
    p.add_argument("--seed", type=int, help="override the random-sample seed")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-sample work (row order is preserved)")
    return p


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    command = args.command or args.command_pos
    if command is None:
        stderr.write("error: no command given (use --command)\n")
        return EXIT_CONFIG
    if args.command and args.command_pos and args.command != args.command_pos:
        stderr.write("error: conflicting commands\n")
        return EXIT_CONFIG
    if args.jobs < 1:
        stderr.write("error: --jobs must be >= 1\n")
        return EXIT_CONFIG
    if args.seed is not None and args.seed < 0:
        stderr.write("error: --seed must be a non-negative integer\n")
        return EXIT_CONFIG

    _configure_xla()
    from . import __version__, config
    from .errors import ConfigError, DegeneracyError, DomainError, EvaluationError, IntegrationError, PreconditionError

    try:
        sc = config.load(args.config, seed=args.seed, tol=args.tol)
        table, status = HANDLERS[command](sc, args)
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (DomainError, DegeneracyError) as exc:
        stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    except (EvaluationError, IntegrationError, PreconditionError, FloatingPointError, np.linalg.LinAlgError) as exc:
        stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERIC

    meta = {
        "tool": f"anisotropic {__version__}",
        "command": command,
        "config_sha256": sc.digest,
        "seed": "none" if sc.seed is None else sc.seed,
        "integration_tol": fmt(sc.tolerances["integration"]),
    }
    text = table.render(meta)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return status


def main(argv: Optional[Sequence[str]] = None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
