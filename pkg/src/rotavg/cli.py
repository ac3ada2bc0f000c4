"""Command-line entry point: ``rotavg {synth,solve,bench}``.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 solver did not
reach Optimal.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import bench
from .io import Problem, ProblemFormatError, build_report, dump_report, read_problem, write_atomic, write_problem
from .pipeline import METHODS, run_method
from .solver import SolverError, SolverSettings
from .synth import SynthConfig, generate, toy_three_cam

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
OUT_ENV = "ROTAVG_OUT"

log = logging.getLogger("rotavg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--config", type=Path, help="JSON file with solver settings (flags override it)")
    g.add_argument("--abs-feas", type=float)
    g.add_argument("--rel-feas", type=float)
    g.add_argument("--infeas-tol", type=float)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--rho", type=float)
    g.add_argument("--relaxation", type=float)
    g.add_argument("--no-adaptive-rho", action="store_true")


def _settings(args) -> SolverSettings:
    values: dict = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read solver config {args.config}: {exc}") from None
        known = {f.name for f in fields(SolverSettings)}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown solver settings in config: {', '.join(sorted(unknown))}")
        values.update(cfg)
    for name in ("abs_feas", "rel_feas", "infeas_tol", "max_iters", "rho", "relaxation"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.no_adaptive_rho:
        values["adaptive_rho"] = False
    try:
        return SolverSettings(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid solver settings: {exc}") from None


def cmd_synth(args) -> int:
    if args.protocol == "toy":
        inst = toy_three_cam(args.sigma, args.axis, args.eps, args.seed)
    else:
        cfg = SynthConfig(args.n, args.p, (args.cov_lo, args.cov_hi), args.seed, noise=not args.noise_free)
        inst = generate(cfg)
    write_problem(args.out, Problem(inst.n_cams, inst.edges, inst.ground_truth, inst.metadata))
    log.info("wrote %d cameras / %d edges to %s", inst.n_cams, len(inst.edges), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    settings = _settings(args)
    try:
        problem = read_problem(args.problem)
    except OSError as exc:
        raise UsageError(f"cannot read {args.problem}: {exc}") from None
    try:
        out = run_method(
            problem.n_cams, problem.edges, args.method, settings, args.alpha,
            problem.ground_truth, args.gap_tol, args.backend,
        )
    except SolverError as exc:
        print(f"rotavg: solver failure on {args.problem}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    text = dump_report(build_report(out, settings, args.alpha, args.backend))
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_atomic(args.out, text)
    if not out.optimal:
        print(f"rotavg: solver stopped with status {out.solver.status.value}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_bench(args) -> int:
    out_dir = args.out or Path(os.environ.get(OUT_ENV, "rotavg-out")) / args.protocol
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {out_dir} is not writable: {exc}") from None
    jobs = bench.plan(
        args.protocol, args.instances, args.seed,
        n_range=args.n_range, p_list=args.p_list,
        cov_eig_range=None if args.cov_lo is None else (args.cov_lo, args.cov_hi),
        sigmas=args.sigmas, axes=args.axes, methods=args.methods,
    )
    rows = bench.run(jobs, _settings(args), args.jobs)
    inst_path, summ_path = bench.write_outputs(out_dir, rows)
    log.info("wrote %s and %s (%d rows)", inst_path, summ_path, len(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rotavg", description="Certifiable anisotropic rotation averaging.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic problem file")
    p.add_argument("--protocol", choices=("uniform", "toy"), default="uniform")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--cov-lo", type=float, default=0.01)
    p.add_argument("--cov-hi", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-free", action="store_true")
    p.add_argument("--sigma", type=float, default=0.1, help="toy protocol: gray-edge variance")
    p.add_argument("--axis", choices=("x", "y", "z"), default="x")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="estimate rotations for a problem file")
    p.add_argument("problem", type=Path)
    p.add_argument("--method", choices=METHODS, default="cso3-aniso")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--gap-tol", type=float, default=1e-4)
    p.add_argument("--backend", choices=("admm", "cvxpy"), default="admm")
    p.add_argument("--out", type=Path)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark protocol and write CSV reports")
    p.add_argument("--protocol", choices=sorted(bench.DEFAULTS), required=True)
    p.add_argument("--n-range", type=_ints)
    p.add_argument("--p-list", type=_floats)
    p.add_argument("--sigmas", type=_floats)
    p.add_argument("--axes", type=lambda s: [a for a in s.split(",") if a])
    p.add_argument("--cov-lo", type=float)
    p.add_argument("--cov-hi", type=float)
    p.add_argument("--methods", type=lambda s: [m for m in s.split(",") if m])
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "bench":
        if (args.cov_lo is None) != (args.cov_hi is None):
            parser.error("--cov-lo and --cov-hi must be given together")
        if args.instances < 0:
            parser.error("--instances must be >= 0")
        bad = [m for m in (args.methods or []) if m not in METHODS]
        if bad:
            parser.error(f"unknown method(s): {', '.join(bad)}")
        bad = [a for a in (args.axes or []) if a not in bench.AXIS_IDS]
        if bad:
            parser.error(f"unknown axis/axes: {', '.join(bad)}")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rotavg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProblemFormatError as exc:
        print(f"rotavg: invalid problem: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"rotavg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
