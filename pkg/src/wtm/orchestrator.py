"""Jacobi sweeps over all subgraphs with waveform exchange through the lines.

Each sweep reads only line history from ``rho`` sweeps back, solves every
subgraph (possibly on a thread pool), and then commits all new port states
at a barrier. Output is bit-identical for any worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .electric_graph import OdeSystem, validate_system
from .evs import MergedSolution, PartitionSpec, Subproblem, TwinPair, merge_solution, split
from .subsolver import LocalSolveInput, LocalSolveOutput, SolveError, factor_spd, local_solve
from .waveform import TimeGrid, Waveform, wf_max_abs_diff
from .wtl import ImpedanceSpec, InitialWaveformPolicy, Wtl

log = logging.getLogger(__name__)


class ValidationError(ValueError):
    """The system is not an SPD ODE system."""


class DivergenceError(ArithmeticError):
    def __init__(self, sweep: int, magnitude: float):
        super().__init__(f"diverged at sweep {sweep}: waveform magnitude {magnitude:.3e}")
        self.sweep = sweep
        self.magnitude = magnitude


@dataclass(frozen=True)
class RunConfig:
    grid: TimeGrid
    tol: float = 1e-9
    max_sweeps: int = 500
    delay: int = 1
    impedance: ImpedanceSpec = field(default_factory=lambda: ImpedanceSpec.constant(1.0))
    init_policy: InitialWaveformPolicy = InitialWaveformPolicy.ZERO
    divergence_cap: float = 1e12
    workers: int = 1
    with_reference: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if not self.divergence_cap > 0:
            raise ValueError(f"divergence_cap must be positive, got {self.divergence_cap}")
        if int(self.delay) != self.delay or self.delay < 1:
            raise ValueError(f"delay must be an integer >= 1, got {self.delay}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def twin_label(pair: TwinPair, side: int) -> str:
    part = pair.part_1 if side == 1 else pair.part_2
    return f"v{pair.vertex}_p{part}"


@dataclass(frozen=True)
class CurveRow:
    sweep: int
    successive_diff: float
    ref_err: Mapping[str, float] | None = None


@dataclass(eq=False)
class SweepState:
    k: int
    outputs: Mapping[int, LocalSolveOutput]  # part -> output of sweep k (empty at k=0)
    wtls: Sequence[Wtl]
    error_curve: list[CurveRow] = field(default_factory=list)

    def twin_potentials(self, k: int | None = None) -> dict[str, Waveform]:
        """Potential of every twin at sweep ``k`` (default: current), as committed to line history."""
        k = self.k if k is None else k
        out = {}
        for w in self.wtls:
            p1, p2 = w.state(k)
            out[twin_label(w.pair, 1)] = p1.u
            out[twin_label(w.pair, 2)] = p2.u
        return out


@dataclass(eq=False)
class Solution:
    grid: TimeGrid
    merged: MergedSolution
    sweeps_used: int
    converged: bool
    error_curve: list[CurveRow]

    @property
    def x(self) -> list[Waveform]:
        return self.merged.x

    def as_array(self) -> np.ndarray:
        """``(n_points, n)`` array of merged vertex waveforms."""
        return np.column_stack([w.samples for w in self.merged.x])


def parallel_execute(tasks: Sequence[tuple[int, Callable[[], LocalSolveOutput]]],
                     workers: int = 1) -> list[LocalSolveOutput]:
    """Run ``(part, task)`` closures; results come back in ascending part order.

    Tasks are pure, so scheduling never affects the numbers. If several fail,
    the error of the lowest part id is raised.
    """
    ordered = sorted(tasks, key=lambda t: t[0])
    if workers <= 1 or len(ordered) <= 1:
        return [fn() for _, fn in ordered]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn) for _, fn in ordered]
        return [f.result() for f in futures]


def build_wtls(subs: Sequence[Subproblem], pairs: Sequence[TwinPair], sys: OdeSystem,
               cfg: RunConfig) -> list[Wtl]:
    """One line per twin pair with its impedance resolved and history initialised.

    Raises :class:`wtm.wtl.ImpedanceError` for any nonpositive Z sample.
    """
    wtls = []
    for pair in pairs:
        Z = cfg.impedance.for_vertex(pair.vertex, cfg.grid)
        w = Wtl(pair.wtl_id, pair, Z, cfg.delay)
        w.init_history(cfg.init_policy, float(sys.x0[pair.vertex]))
        wtls.append(w)
    return wtls


def sweep(state: SweepState, subs: Sequence[Subproblem], grid: TimeGrid,
          workers: int = 1) -> SweepState:
    """Advance one Jacobi sweep and commit the new port states to every line."""
    k = state.k + 1
    wtls = state.wtls
    incoming = {}
    for w in wtls:
        to1, to2 = w.exchange(k)
        incoming[(w.id, 1)] = to1
        incoming[(w.id, 2)] = to2

    tasks = []
    for sub in subs:
        inp = LocalSolveInput(
            sub=sub,
            incident={p.local: incoming[(p.wtl_id, p.side)] for p in sub.ports},
            Z={p.local: wtls[p.wtl_id].Z for p in sub.ports},
            grid=grid,
        )
        tasks.append((sub.part, lambda inp=inp: local_solve(inp)))
    outputs = {out.part: out for out in parallel_execute(tasks, workers)}

    # barrier: all solves done, commit histories
    port_of = {}
    for sub in subs:
        for p in sub.ports:
            port_of[(p.wtl_id, p.side)] = outputs[sub.part].ports[p.local]
    for w in wtls:
        w.push_history(k, port_of[(w.id, 1)], port_of[(w.id, 2)])
    return SweepState(k, outputs, wtls, state.error_curve)


def reference_solve(sys: OdeSystem, grid: TimeGrid) -> list[Waveform]:
    """Backward-Euler solution of the undecomposed system, one waveform per vertex."""
    h = grid.step
    Ch = sys.C.to_dense() / h
    cf = factor_spd(Ch + sys.A.to_dense())
    X = np.empty((grid.n_points, sys.n))
    X[0] = sys.x0
    for m in range(1, grid.n_points):
        X[m] = scipy.linalg.cho_solve(cf, Ch @ X[m - 1] + sys.b)
    if not np.all(np.isfinite(X)):
        raise SolveError("reference solve produced non-finite values")
    return [Waveform(grid, X[:, v]) for v in range(sys.n)]


def error_curve_vs_reference(state: SweepState, ref: Sequence[Waveform]) -> list[tuple[int, str, float]]:
    """``(sweep, twin, max|u_twin - u_ref|)`` for every twin potential of ``state``."""
    out = []
    for w in state.wtls:
        p1, p2 = w.state(state.k)
        r = ref[w.pair.vertex]
        out.append((state.k, twin_label(w.pair, 1), wf_max_abs_diff(p1.u, r)))
        out.append((state.k, twin_label(w.pair, 2), wf_max_abs_diff(p2.u, r)))
    return out


def _max_magnitude(outputs: Mapping[int, LocalSolveOutput]) -> float:
    mag = 0.0
    for out in outputs.values():
        for wf in out.x:
            mag = max(mag, float(np.max(np.abs(wf.samples))))
        for ps in out.ports.values():
            mag = max(mag, float(np.max(np.abs(ps.i.samples))))
    return mag


def prepare(sys: OdeSystem, p: PartitionSpec, cfg: RunConfig):
    """Validate, split and wire up the lines; everything a run needs before sweep 1."""
    check = validate_system(sys)
    if not check:
        raise ValidationError(check.reason)
    subs, pairs = split(sys, p)
    wtls = build_wtls(subs, pairs, sys, cfg)
    return subs, pairs, wtls


def run(sys: OdeSystem, p: PartitionSpec, cfg: RunConfig) -> Solution:
    """Iterate sweeps until the twin potentials stop changing.

    Stops when the largest change of any twin potential is at most ``cfg.tol`` (converged) or after ``cfg.max_sweeps``
    sweeps (not converged). Raises :class:`DivergenceError` when any sample
    exceeds ``cfg.divergence_cap``.
    """
    subs, pairs, wtls = prepare(sys, p, cfg)
    grid = cfg.grid
    ref = reference_solve(sys, grid) if cfg.with_reference else None

    state = SweepState(0, {}, wtls, [])
    converged = False
    while state.k < cfg.max_sweeps:
        state = sweep(state, subs, grid, cfg.workers)
        mag = _max_magnitude(state.outputs)
        if not np.isfinite(mag) or mag > cfg.divergence_cap:
            raise DivergenceError(state.k, mag)
        # sweep k is computed from sweep k - delay, so that is the iterate it updates;
        # with delay 1 this is the plain successive difference
        cur = state.twin_potentials()
        prev = state.twin_potentials(state.k - cfg.delay)
        diff = max((wf_max_abs_diff(cur[name], prev[name]) for name in cur), default=0.0)
        ref_err = None
        if ref is not None:
            ref_err = {name: err for _, name, err in error_curve_vs_reference(state, ref)}
        state.error_curve.append(CurveRow(state.k, diff, ref_err))
        if diff <= cfg.tol:
            converged = True
            break

    log.info("WTM %s after %d sweeps (last diff %.3e)",
             "converged" if converged else "stopped", state.k, state.error_curve[-1].successive_diff)
    merged = merge_solution(subs, pairs, {part: out.x for part, out in state.outputs.items()}, sys.n)
    return Solution(grid, merged, state.k, converged, state.error_curve)
