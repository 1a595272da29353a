"""Command-line front end: run, verify, converge, reproduce.

Exit codes: 0 on success, 1 for usage or configuration problems, 2 when
the numerics fail (step-size certification, solver divergence, non-finite
state).  The environment variable HELESHAW_OUTPUT_DIR supplies a default
output directory when neither the config nor the flags name one.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .brinkman import IterationLimitExceeded, SingularMatrix
from .expressions import ExpressionError
from .grid import BoundaryCondition, InitialDataError
from .sim import SimConfig, convergence_study, load_config, run
from .transport import CflConfig, CflMode, CflViolation, ModelParams, NonFiniteState
from .verification import DENSE_ORACLE_LIMIT, format_rows, run_battery

OUTPUT_DIR_ENV = "HELESHAW_OUTPUT_DIR"

NUMERICAL_ERRORS = (CflViolation, NonFiniteState, IterationLimitExceeded,
                    SingularMatrix, InitialDataError)

FIGURES = {
    "fig1": {"init": "gaussian1", "gamma": 3.0, "times": (0.0, 1.0, 2.0, 4.0)},
    "fig2": {"init": "gaussian2", "gamma": 10.0, "times": (0.0, 2.0, 4.0, 6.0)},
}
BASE_CELLS = 320  # h = 1/64 on [-2.5, 2.5]


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; route through UsageError so
    # usage problems and numerical failures keep distinct exit codes.
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}".rstrip())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heleshaw",
                     description="Explicit scheme for Brinkman-regularized "
                                 "Hele-Shaw tumor growth")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("--config", required=True, help="path to key = value config")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run the self-check battery")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--sizes", type=int, nargs="+", default=[8, 12, 16],
                          help=f"grid sizes, each at most {DENSE_ORACLE_LIMIT}")
    p_verify.add_argument("--inject-fault", action="store_true",
                          help=argparse.SUPPRESS)
    p_verify.set_defaults(func=cmd_verify)

    p_conv = sub.add_parser("converge", help="self-convergence study")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE")
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("--t-snapshot", type=float, default=0.5)
    p_conv.add_argument("--out", default="convergence.csv",
                        help="where to write the table")
    p_conv.set_defaults(func=cmd_converge)

    p_rep = sub.add_parser("reproduce", help="rerun a published experiment")
    p_rep.add_argument("figure", choices=sorted(FIGURES))
    p_rep.add_argument("--scale", type=int, default=1,
                       help="coarsen h by this integer factor")
    p_rep.add_argument("--out", default=None, help="output directory")
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def cmd_run(args) -> int:
    cfg = _load(args.config, args.overrides)
    if cfg.output_dir is None and os.environ.get(OUTPUT_DIR_ENV):
        cfg = replace(cfg, output_dir=os.environ[OUTPUT_DIR_ENV])
    state, diag = run(cfg)
    failed = len(diag.failed_reports())
    print(f"completed {state.step} steps to t = {state.t:g}")
    if cfg.output_dir:
        print(f"wrote frames and diagnostics to {cfg.output_dir}")
    if failed:
        print(f"warning: {failed} invariant reports failed (see diagnostics)")
    return 0


def cmd_verify(args) -> int:
    for n in args.sizes:
        if n > DENSE_ORACLE_LIMIT:
            raise UsageError(f"size {n} refused: the dense oracle is limited to "
                             f"{DENSE_ORACLE_LIMIT} cells per side")
        if n < 4:
            raise UsageError(f"size {n} refused: need at least 4 cells per side")
    rows = run_battery(seed=args.seed, sizes=tuple(args.sizes),
                       inject_fault=args.inject_fault)
    for line in format_rows(rows):
        print(line)
    bad = sum(not r.passed for r in rows)
    print(f"{len(rows) - bad}/{len(rows)} checks passed")
    return 0 if bad == 0 else 1


def cmd_converge(args) -> int:
    cfg = _load(args.config, args.overrides)
    if args.levels < 2:
        raise UsageError("need at least 2 levels")
    rows = convergence_study(cfg, levels=args.levels, t_snapshot=args.t_snapshot)
    lines = ["n_cells,h,diff_l1,rate"]
    for r in rows:
        lines.append(f"{r.n_cells},{r.h:.17g},{r.diff_l1:.17g},{r.rate:.17g}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote convergence table ({args.levels} levels) to {args.out}")
    return 0


def cmd_reproduce(args) -> int:
    fig = FIGURES[args.figure]
    if args.scale < 1 or BASE_CELLS % args.scale != 0:
        raise UsageError(f"--scale must be a positive divisor of {BASE_CELLS}, "
                         f"got {args.scale}")
    n_cells = BASE_CELLS // args.scale
    if n_cells < 4:
        raise UsageError(f"--scale {args.scale} leaves only {n_cells} cells")
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or f"{args.figure}_frames"
    times = fig["times"]
    # The Gaussian data are not exactly compatible with zero-flux walls,
    # but their tails are far below round-off at the boundary; the
    # published experiments use Neumann walls regardless.
    cfg = SimConfig(
        lo=-2.5, hi=2.5, n_cells=n_cells,
        bc=BoundaryCondition.NEUMANN,
        params=ModelParams(mu=1.0, a=1.0, gamma=fig["gamma"],
                           alpha=1.0, beta=1.0, theta=1.0),
        cfl=CflConfig(mode=CflMode.STRICT),
        t_end=times[-1],
        output_every=0,
        output_dir=out,
        init=fig["init"],
    )
    state, diag = run(cfg, snapshot_times=times[1:])
    print(f"{args.figure}: {state.step} steps to t = {state.t:g}, "
          f"frames at t = {', '.join(f'{t:g}' for t in times)} in {out}")
    failed = len(diag.failed_reports())
    if failed:
        print(f"warning: {failed} invariant reports failed (see diagnostics)")
    return 0


def _load(config_path: str, overrides) -> SimConfig:
    path = Path(config_path)
    if not path.is_file():
        raise UsageError(f"config file not found: {config_path}")
    try:
        return load_config(path, overrides)
    except (ValueError, ExpressionError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
