"""Sampled waveforms on a shared uniform time grid.

Every waveform in a run lives on the same :class:`TimeGrid`. Operations
are pure and return new :class:`Waveform` objects; sample arrays are
stored read-only so waveforms can be handed to worker threads freely.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GridMismatchError(ValueError):
    """Two waveforms combined in one operation live on different grids."""


class NonPositiveDivisorError(ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"divisor sample {index} is {value!r}; must be > 0")
        self.index = index
        self.value = value


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_start + m*step`` for ``m = 0 .. n_points-1``."""

    t_start: float
    t_end: float
    step: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t_start, self.t_end, self.step)):
            raise ValueError("time grid parameters must be finite")
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        span = self.t_end - self.t_start
        n_steps = round(span / self.step)
        if n_steps < 1 or abs(n_steps * self.step - span) > 1e-12 * span:
            raise ValueError(
                f"step {self.step} does not divide the window [{self.t_start}, {self.t_end}]"
            )

    @property
    def n_points(self) -> int:
        return round((self.t_end - self.t_start) / self.step) + 1

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.step * np.arange(self.n_points)


@dataclass(frozen=True, eq=False)
class Waveform:
    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        if s.shape != (self.grid.n_points,):
            raise ValueError(
                f"waveform has {s.size} samples, grid has {self.grid.n_points}"
            )
        if not np.all(np.isfinite(s)):
            bad = int(np.flatnonzero(~np.isfinite(s))[0])
            raise ValueError(f"non-finite waveform sample at index {bad}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def __repr__(self):
        return f"Waveform(n={self.samples.size}, min={self.samples.min():.6g}, max={self.samples.max():.6g})"


def _check_same_grid(a: Waveform, b: Waveform):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def wf_constant(grid: TimeGrid, value: float) -> Waveform:
    if not math.isfinite(value):
        raise ValueError(f"constant waveform value must be finite, got {value!r}")
    return Waveform(grid, np.full(grid.n_points, float(value)))


def wf_zero(grid: TimeGrid) -> Waveform:
    return wf_constant(grid, 0.0)


def wf_axpy(a: float, x: Waveform, y: Waveform) -> Waveform:
    """Return ``a*x + y`` samplewise."""
    _check_same_grid(x, y)
    return Waveform(x.grid, a * x.samples + y.samples)


def wf_pointwise_div(x: Waveform, z: Waveform) -> Waveform:
    """Return ``x / z`` samplewise; every sample of ``z`` must be positive."""
    _check_same_grid(x, z)
    bad = np.flatnonzero(~(z.samples > 0))
    if bad.size:
        raise NonPositiveDivisorError(int(bad[0]), float(z.samples[bad[0]]))
    return Waveform(x.grid, x.samples / z.samples)


def wf_max_abs_diff(a: Waveform, b: Waveform) -> float:
    """Max over the grid of ``|a(t) - b(t)|``."""
    _check_same_grid(a, b)
    return float(np.max(np.abs(a.samples - b.samples)))


def format_real(value: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return f"{value:.17g}"


def write_waveform_csv(path, wf: Waveform, column: str = "value"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", column])
        for t, v in zip(wf.grid.times, wf.samples):
            writer.writerow([format_real(t), format_real(v)])


def read_waveform_csv(path, grid: TimeGrid, column: str = "value") -> Waveform:
    """Read a two-column ``t,<column>`` CSV whose rows must sit exactly on ``grid``.

    No interpolation is done; a time column that deviates from the grid by
    more than roundoff is an error.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", column]:
        raise ValueError(f"{path}: expected header 't,{column}'")
    body = [r for r in rows[1:] if r]
    if len(body) != grid.n_points:
        raise ValueError(f"{path}: {len(body)} rows, run grid has {grid.n_points} points")
    t = np.array([float(r[0]) for r in body])
    v = np.array([float(r[1]) for r in body])
    scale = max(abs(grid.t_start), abs(grid.t_end), grid.step)
    off = np.abs(t - grid.times)
    if np.any(off > 1e-9 * scale):
        m = int(np.argmax(off))
        raise ValueError(f"{path}: row {m + 1} time {t[m]!r} is off the run grid")
    return Waveform(grid, v)
