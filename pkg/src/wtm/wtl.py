"""Waveform transmission lines.

A line joins two twin vertices. At sweep ``k`` each end receives the wave
launched from the far end ``rho`` sweeps earlier::

    u1^k + Z i1^k = u2^(k-rho) - Z i2^(k-rho)
    u2^k + Z i2^k = u1^(k-rho) - Z i1^(k-rho)

The right-hand sides are what :meth:`Wtl.exchange` returns.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .evs import TwinPair
from .waveform import (
    GridMismatchError,
    TimeGrid,
    Waveform,
    read_waveform_csv,
    wf_constant,
    wf_zero,
)


class ImpedanceError(ValueError):
    pass


class HistoryError(RuntimeError):
    pass


class InitialWaveformPolicy(enum.Enum):
    ZERO = "zero"
    FLAT_X0 = "flat_x0"


@dataclass(frozen=True, eq=False)
class ImpedanceWaveform:
    Z: Waveform

    def __post_init__(self):
        bad = np.flatnonzero(~(self.Z.samples > 0))
        if bad.size:
            m = int(bad[0])
            raise ImpedanceError(
                f"characteristic impedance must be positive: Z(t={self.Z.grid.times[m]:.6g}) "
                f"= {self.Z.samples[m]!r}"
            )

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "ImpedanceWaveform":
        if not value > 0:
            raise ImpedanceError(f"characteristic impedance must be positive, got {value!r}")
        return cls(wf_constant(grid, value))

    @property
    def is_constant(self) -> bool:
        s = self.Z.samples
        return bool(np.all(s == s[0]))


@dataclass(frozen=True)
class ImpedanceSource:
    """Either a constant value or a ``t,Z`` samples file on the run grid."""

    value: float | None = None
    path: Path | None = None

    def __post_init__(self):
        if (self.value is None) == (self.path is None):
            raise ValueError("impedance source needs exactly one of value or path")

    def resolve(self, grid: TimeGrid) -> ImpedanceWaveform:
        if self.value is not None:
            return ImpedanceWaveform.constant(grid, self.value)
        return ImpedanceWaveform(read_waveform_csv(self.path, grid, column="Z"))


@dataclass(frozen=True)
class ImpedanceSpec:
    """Global impedance with optional per-boundary-vertex overrides."""

    default: ImpedanceSource = field(default_factory=lambda: ImpedanceSource(value=1.0))
    per_vertex: Mapping[int, ImpedanceSource] = field(default_factory=dict)

    @classmethod
    def constant(cls, value: float) -> "ImpedanceSpec":
        return cls(ImpedanceSource(value=value))

    def for_vertex(self, vertex: int, grid: TimeGrid) -> ImpedanceWaveform:
        return self.per_vertex.get(vertex, self.default).resolve(grid)


@dataclass(frozen=True, eq=False)
class PortState:
    u: Waveform  # port potential
    i: Waveform  # current flowing from the line into the twin vertex

    def __post_init__(self):
        if self.u.grid != self.i.grid:
            raise ValueError("port potential and current must share a grid")


def incident_wave(far: PortState, Z: ImpedanceWaveform) -> Waveform:
    """``u_far - Z * i_far``: the wave arriving at the near end."""
    if far.u.grid != Z.Z.grid or far.i.grid != Z.Z.grid:
        raise GridMismatchError("port state and impedance live on different grids")
    return Waveform(far.u.grid, far.u.samples - Z.Z.samples * far.i.samples)


class Wtl:
    """One line with its port history, keyed by sweep index."""

    def __init__(self, wtl_id: int, pair: TwinPair, Z: ImpedanceWaveform, delay: int = 1):
        if int(delay) != delay or delay < 1:
            raise ValueError(f"delay must be an integer >= 1, got {delay!r}")
        self.id = wtl_id
        self.pair = pair
        self.Z = Z
        self.delay = int(delay)
        self.capacity = self.delay + 1
        self._history: OrderedDict[int, tuple[PortState, PortState]] = OrderedDict()

    @property
    def grid(self) -> TimeGrid:
        return self.Z.Z.grid

    def __repr__(self):
        return f"Wtl(id={self.id}, vertex={self.pair.vertex}, delay={self.delay})"

    def init_history(self, policy: InitialWaveformPolicy = InitialWaveformPolicy.ZERO,
                     x0: float = 0.0):
        """Fill sweeps ``1-rho .. 0`` so the first ``rho`` sweeps have data to read."""
        zero = wf_zero(self.grid)
        if policy is InitialWaveformPolicy.ZERO:
            u = zero
        elif policy is InitialWaveformPolicy.FLAT_X0:
            u = wf_constant(self.grid, x0)
        else:
            raise ValueError(f"unknown initial-waveform policy {policy!r}")
        state = PortState(u, zero)
        self._history.clear()
        for k in range(1 - self.delay, 1):
            self._history[k] = (state, state)

    def push_history(self, k: int, port1: PortState, port2: PortState):
        if k in self._history:
            raise HistoryError(f"line {self.id}: sweep {k} already recorded")
        if self._history and k < next(reversed(self._history)):
            raise HistoryError(f"line {self.id}: sweep {k} is older than recorded history")
        self._history[k] = (port1, port2)
        while len(self._history) > self.capacity:
            self._history.popitem(last=False)

    def state(self, k: int) -> tuple[PortState, PortState]:
        try:
            return self._history[k]
        except KeyError:
            raise HistoryError(
                f"line {self.id}: no history for sweep {k} (have {list(self._history)})"
            ) from None

    def exchange(self, k: int) -> tuple[Waveform, Waveform]:
        """Incident waves ``(to port 1, to port 2)`` for sweep ``k``."""
        p1, p2 = self.state(k - self.delay)
        return incident_wave(p2, self.Z), incident_wave(p1, self.Z)

    @property
    def latest(self) -> int:
        return next(reversed(self._history))
