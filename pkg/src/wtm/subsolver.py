"""Backward-Euler solve of one subgraph coupled to its transmission lines.

With the line currents eliminated, a subgraph obeys::

    C dx/dt + (A + D(t)) x = b + r(t)

where ``D`` puts ``1/Z`` on each port row and ``r`` puts ``w/Z`` there,
``w`` being the incident wave. After the march the port currents follow
from ``i = (w - u) / Z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from .evs import Subproblem
from .waveform import TimeGrid, Waveform
from .wtl import ImpedanceWaveform, PortState


class SolveError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class LocalSolveInput:
    sub: Subproblem
    incident: Mapping[int, Waveform]  # port local row -> w
    Z: Mapping[int, ImpedanceWaveform]  # port local row -> Z
    grid: TimeGrid

    def __post_init__(self):
        rows = {p.local for p in self.sub.ports}
        if set(self.incident) != rows or set(self.Z) != rows:
            raise ValueError(
                f"part {self.sub.part}: need one incident wave and one Z per port row {sorted(rows)}"
            )
        for w in self.incident.values():
            if w.grid != self.grid:
                raise ValueError("incident wave is not on the run grid")
        for z in self.Z.values():
            if z.Z.grid != self.grid:
                raise ValueError("impedance is not on the run grid")


@dataclass(frozen=True, eq=False)
class LocalSolveOutput:
    part: int
    x: tuple[Waveform, ...]
    ports: Mapping[int, PortState]  # port local row -> (u, i)


def factor_spd(M: np.ndarray):
    try:
        return scipy.linalg.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveError(f"step matrix is not positive definite: {exc}") from exc


def linear_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve of an SPD system."""
    x = scipy.linalg.cho_solve(factor_spd(np.asarray(M, dtype=float)), np.asarray(rhs, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SolveError("linear solve produced non-finite values")
    return x


def assemble_step_matrix(sub: Subproblem, z_at_t: Mapping[int, float], h: float) -> np.ndarray:
    """``C/h + A + D`` for one time step; raises :class:`SolveError` unless SPD."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    M = sub.C.to_dense() / h + sub.A.to_dense()
    for row, z in z_at_t.items():
        if not z > 0:
            raise SolveError(f"impedance at port row {row} is {z!r}; must be > 0")
        M[row, row] += 1.0 / z
    factor_spd(M)
    return M


def local_solve(inp: LocalSolveInput, reuse_factorization: bool = True) -> LocalSolveOutput:
    """March the subgraph across the window for one sweep.

    With constant impedances (and ``reuse_factorization``) the step matrix
    is factorized once for the whole window; otherwise once per step.
    """
    sub, grid = inp.sub, inp.grid
    h, N, n = grid.step, grid.n_points, sub.n
    C = sub.C.to_dense()
    Ch = C / h
    rows = [p.local for p in sub.ports]

    # per-step forcing b + r(t_m), shape (N, n)
    F = np.tile(np.asarray(sub.b, dtype=float), (N, 1))
    zs = {r: inp.Z[r].Z.samples for r in rows}
    ws = {r: inp.incident[r].samples for r in rows}
    for r in rows:
        F[:, r] += ws[r] / zs[r]

    X = np.empty((N, n))
    X[0] = sub.x0
    if reuse_factorization and all(inp.Z[r].is_constant for r in rows):
        M = assemble_step_matrix(sub, {r: zs[r][0] for r in rows}, h)
        cf = factor_spd(M)
        # one factorization; propagate x_m = P x_{m-1} + Q f_m
        Q = scipy.linalg.cho_solve(cf, np.eye(n))
        P = Q @ Ch
        G = F @ Q.T
        x = X[0]
        for m in range(1, N):
            x = P @ x + G[m]
            X[m] = x
    else:
        A = sub.A.to_dense()
        for m in range(1, N):
            M = Ch + A
            for r in rows:
                M[r, r] += 1.0 / zs[r][m]
            X[m] = scipy.linalg.cho_solve(factor_spd(M), Ch @ X[m - 1] + F[m])

    if not np.all(np.isfinite(X)):
        raise SolveError(f"part {sub.part}: local solve produced non-finite values")

    x_wf = tuple(Waveform(grid, X[:, l]) for l in range(n))
    ports = {}
    for r in rows:
        i = (ws[r] - X[:, r]) / zs[r]
        ports[r] = PortState(x_wf[r], Waveform(grid, i))
    return LocalSolveOutput(sub.part, x_wf, ports)

