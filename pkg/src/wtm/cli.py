"""Command line front end.

Exit codes: 0 converged (or all checks passed), 1 usage/parse/validation
error, 2 not converged within ``max_sweeps``, 3 diverged.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .electric_graph import validate_snnd, validate_spd
from .evs import BoundaryVertex, SplitError, check_partition, resolve_fractions, split
from .orchestrator import DivergenceError, ValidationError, run
from .output import write_outputs
from .problem import Problem, ProblemError, demo_problem_text, load_problem
from .subsolver import SolveError
from .waveform import TimeGrid
from .wtl import HistoryError, ImpedanceError, ImpedanceSpec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_DIVERGED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 means "not converged" here
    def error(self, message):
        raise UsageError(message)


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("--tol", type=float, help="stop when successive twin potentials differ by at most this")
    p.add_argument("--max-sweeps", type=int, help="sweep budget")
    p.add_argument("--h", type=float, help="time step of the run grid")
    p.add_argument("--z", type=float, help="constant characteristic impedance for every line")
    p.add_argument("--rho", type=int, help="line delay in sweeps")
    p.add_argument("--workers", type=int, help="threads for the per-sweep subgraph solves")
    p.add_argument("--fraction", type=float,
                   help="force fC = fA = fb to this value on every boundary vertex")
    p.add_argument("--with-reference", action="store_true",
                   help="also track the error against the monolithic solve")
    p.add_argument("--out", help="output directory (default: $WTM_OUT or the current directory)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wtm", description="Waveform Transmission Method solver for SPD ODE systems")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p_run = sub.add_parser("run", help="solve a problem file")
    p_run.add_argument("problem")
    _add_overrides(p_run)
    p_demo = sub.add_parser("demo", help="solve the built-in two-part RC demo")
    _add_overrides(p_demo)
    p_val = sub.add_parser("validate", help="check a problem file without solving")
    p_val.add_argument("problem")
    _add_overrides(p_val)
    return parser


def apply_overrides(problem: Problem, args) -> Problem:
    cfg = problem.config
    changes = {}
    if args.tol is not None:
        changes["tol"] = args.tol
    if args.max_sweeps is not None:
        changes["max_sweeps"] = args.max_sweeps
    if args.rho is not None:
        changes["delay"] = args.rho
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.with_reference:
        changes["with_reference"] = True
    if args.h is not None:
        changes["grid"] = TimeGrid(cfg.grid.t_start, cfg.grid.t_end, args.h)
    if args.z is not None:
        if not args.z > 0:
            raise ImpedanceError(f"characteristic impedance must be positive (Z(t) > 0), got {args.z}")
        changes["impedance"] = ImpedanceSpec.constant(args.z)
    partition = problem.partition
    if args.fraction is not None:
        f = args.fraction
        partition = dataclasses.replace(
            partition,
            boundary=tuple(BoundaryVertex(bv.vertex, bv.part_a, bv.part_b, f, f, f) for bv in partition.boundary),
        )
    return Problem(problem.system, partition, dataclasses.replace(cfg, **changes))


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("WTM_OUT") or ".")


def _fail(msg: str) -> int:
    print(f"wtm: error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _solve(problem: Problem, out_dir: Path) -> int:
    try:
        sol = run(problem.system, problem.partition, problem.config)
    except DivergenceError as exc:
        print(f"wtm: error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_outputs(sol, out_dir)
    last = sol.error_curve[-1]
    status = "converged" if sol.converged else "not converged"
    print(f"{status} after {sol.sweeps_used} sweeps; successive_diff={last.successive_diff:.3e}; "
          f"max twin mismatch={sol.merged.max_twin_mismatch:.3e}")
    if last.ref_err:
        print("error vs reference: " + ", ".join(f"{k}={v:.3e}" for k, v in last.ref_err.items()))
    print(f"wrote solution.csv, convergence.csv, twins.csv to {out_dir}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_run(args) -> int:
    problem = apply_overrides(load_problem(args.problem), args)
    return _solve(problem, _out_dir(args))


def cmd_demo(args) -> int:
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "demo.wtm"
    path.write_text(demo_problem_text())
    args.with_reference = True
    problem = apply_overrides(load_problem(path), args)
    return _solve(problem, out_dir)


def validate_report(problem: Problem) -> list[tuple[bool, str]]:
    """Checks in order; stops after a failed partition check since later ones depend on it."""
    sys_ = problem.system
    checks = []
    for name, mat in (("C", sys_.C), ("A", sys_.A)):
        r = validate_spd(mat)
        checks.append((r.ok, f"SPD check for {name}" + ("" if r else f": {r.reason}")))
    try:
        check_partition(sys_, problem.partition)
    except SplitError as exc:
        checks.append((False, f"partition legality: {exc}"))
        return checks
    checks.append((True, "partition legality"))
    for bv in problem.partition.boundary:
        fc, fa, fb = resolve_fractions(sys_, problem.partition, bv)
        checks.append((True, f"fractions for boundary vertex {bv.vertex}: fC={fc:.6g} fA={fa:.6g} fb={fb:.6g}"))
    try:
        subs, _ = split(sys_, problem.partition)
    except SplitError as exc:
        checks.append((False, f"SNND check: {exc}"))
        return checks
    for s in subs:
        for name, mat in (("C", s.C), ("A", s.A)):
            r = validate_snnd(mat)
            checks.append((r.ok, f"SNND check for part {s.part} {name}" + ("" if r else f": {r.reason}")))
    return checks


def cmd_validate(args) -> int:
    problem = apply_overrides(load_problem(args.problem), args)
    checks = validate_report(problem)
    for ok, msg in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {msg}")
    failed = [msg for ok, msg in checks if not ok]
    if failed:
        return _fail(failed[0])
    return EXIT_OK


COMMANDS = {"run": cmd_run, "demo": cmd_demo, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ProblemError, ValidationError, SplitError, ImpedanceError, SolveError,
            HistoryError, OSError, ValueError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
