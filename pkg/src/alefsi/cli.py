"""Command-line driver: run benchmarks, verify the solver, time scaling.

Exit codes: 0 on success, 1 on runtime failure (diverged solve, degenerate
mesh, failed verification), 2 on usage or configuration errors.  Output
files land in the directory named by ``--output-dir`` or the
``ALEFSI_OUTPUT_DIR`` environment variable (default: current directory).
"""

from __future__ import annotations

import argparse
import os
import sys

from .acceptance import run_all
from .config import read_config
from .driver import run
from .errors import AlefsiError, ConfigError
from .partition import scaling_run, write_scaling_csv

ENV_OUTPUT_DIR = "ALEFSI_OUTPUT_DIR"


def _output_dir(args) -> str:
    return args.output_dir or os.environ.get(ENV_OUTPUT_DIR) or "."


def _load_config(path):
    try:
        return read_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def cmd_run(args) -> int:
    config = _load_config(args.config)
    if config.output:
        path = os.path.join(_output_dir(args), config.output)
        with open(path, "w") as fh:
            return run(config, stream=fh, log=lambda msg: print(msg, file=sys.stderr))
    return run(config, log=lambda msg: print(msg, file=sys.stderr))


def cmd_verify(args) -> int:
    results = run_all(report=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 1


def cmd_scaling(args) -> int:
    config = _load_config(args.config)
    try:
        threads = [int(t) for t in args.threads.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --threads list {args.threads!r}: {exc}") from exc
    if not threads or any(t < 1 for t in threads):
        raise ConfigError("--threads needs a comma-separated list of positive counts")
    from .driver import build_problem, make_inflow

    _, dofmap, params, _ = build_problem(config)
    rows = scaling_run(
        dofmap,
        params,
        threads,
        inflow=make_inflow(config),
        dt=config.dt,
        theta=config.theta_value,
    )
    name = config.output or "scaling.csv"
    path = os.path.join(_output_dir(args), name)
    write_scaling_csv(path, rows)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alefsi",
        description="Monolithic fluid-structure interaction benchmark solver.",
    )
    parser.add_argument(
        "--output-dir",
        default=None,
        help=f"directory for output files (default: ${ENV_OUTPUT_DIR} or '.')",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured benchmark, emit a CSV time series")
    p_run.add_argument("config", help="path to a key = value config file")
    p_run.set_defaults(fn=cmd_run)

    p_verify = sub.add_parser("verify", help="run the acceptance suite, one line per criterion")
    p_verify.set_defaults(fn=cmd_verify)

    p_scaling = sub.add_parser("scaling", help="time assembly and solve at several thread counts")
    p_scaling.add_argument("config", help="path to a key = value config file")
    p_scaling.add_argument("--threads", default="1,2,4", help="comma-separated thread counts")
    p_scaling.set_defaults(fn=cmd_scaling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AlefsiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
