"""Line-oriented problem files.

::

    system n=<int>
    C <i> <j> <value>            # i <= j, 0-based; A likewise
    b <i> <value>                # unlisted entries are 0; x0 likewise
    part <i> <partId>
    boundary <i> <partA> <partB> [fC] [fA] [fb]
    parts <partId> ...           # optional; declared parts must be non-empty
    window <T1> <T2> <h>
    impedance const <Z> [at <vertex>]
    impedance samples <file.csv> [at <vertex>]
    delay <rho>
    tol <real>
    max_sweeps <int>
    init zero|flat_x0
    divergence_cap <real>

``#`` starts a comment. Sample-file paths are relative to the problem file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .electric_graph import OdeSystem, SymMatrix
from .evs import BoundaryVertex, PartitionSpec
from .orchestrator import RunConfig
from .waveform import TimeGrid, format_real
from .wtl import ImpedanceSource, ImpedanceSpec, InitialWaveformPolicy


class ProblemError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True, eq=False)
class Problem:
    system: OdeSystem
    partition: PartitionSpec
    config: RunConfig


def _num(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ProblemError(f"expected a number, got {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise ProblemError(f"value {tok!r} is not finite", lineno)
    return v


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ProblemError(f"expected an integer, got {tok!r}", lineno) from None


def _impedance_source(args: list[str], lineno: int, base_dir: Path | None):
    if len(args) not in (2, 4) or (len(args) == 4 and args[2] != "at"):
        raise ProblemError("usage: impedance const <Z> | samples <file> [at <vertex>]", lineno)
    kind, arg = args[0], args[1]
    if kind == "const":
        src = ImpedanceSource(value=_num(arg, lineno))
    elif kind == "samples":
        path = Path(arg)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        src = ImpedanceSource(path=path)
    else:
        raise ProblemError(f"unknown impedance kind {kind!r}", lineno)
    vertex = _int(args[3], lineno) if len(args) == 4 else None
    return vertex, src


def parse_problem(text: str, base_dir=None) -> Problem:
    base_dir = Path(base_dir) if base_dir is not None else None
    n = None
    mats = {"C": {}, "A": {}}
    vecs = {"b": {}, "x0": {}}
    interior = {}
    boundary = []
    declared_parts = None
    window = None
    z_default = ImpedanceSource(value=1.0)
    z_vertex = {}
    opts = {}

    def need_n(lineno):
        if n is None:
            raise ProblemError("'system n=<int>' must come first", lineno)
        return n

    def check_index(i, lineno, what):
        if not 0 <= i < need_n(lineno):
            raise ProblemError(f"dimension mismatch: {what} index {i} outside 0..{n - 1}", lineno)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()

        if key == "system":
            if n is not None:
                raise ProblemError("duplicate 'system' line", lineno)
            if len(args) != 1 or not args[0].startswith("n="):
                raise ProblemError("usage: system n=<int>", lineno)
            n = _int(args[0][2:], lineno)
            if n < 1:
                raise ProblemError(f"system size must be positive, got {n}", lineno)
        elif key in mats:
            if len(args) != 3:
                raise ProblemError(f"usage: {key} <i> <j> <value>", lineno)
            i, j, v = _int(args[0], lineno), _int(args[1], lineno), _num(args[2], lineno)
            check_index(i, lineno, key)
            check_index(j, lineno, key)
            mirrored = i > j
            i, j = min(i, j), max(i, j)
            store = mats[key]
            if (i, j) in store:
                prev_v, prev_mirrored = store[(i, j)]
                if prev_mirrored == mirrored:
                    raise ProblemError(f"duplicate {key} entry ({i},{j})", lineno)
                if prev_v != v:
                    raise ProblemError(
                        f"asymmetric {key} entry pair ({i},{j}): {prev_v!r} vs {v!r}", lineno
                    )
                continue
            store[(i, j)] = (v, mirrored)
        elif key in vecs:
            if len(args) != 2:
                raise ProblemError(f"usage: {key} <i> <value>", lineno)
            i, v = _int(args[0], lineno), _num(args[1], lineno)
            check_index(i, lineno, key)
            if i in vecs[key]:
                raise ProblemError(f"duplicate {key} entry {i}", lineno)
            vecs[key][i] = v
        elif key == "part":
            if len(args) != 2:
                raise ProblemError("usage: part <i> <partId>", lineno)
            i = _int(args[0], lineno)
            check_index(i, lineno, "part")
            if i in interior:
                raise ProblemError(f"vertex {i} assigned twice", lineno)
            interior[i] = _int(args[1], lineno)
        elif key == "boundary":
            if not 3 <= len(args) <= 6:
                raise ProblemError("usage: boundary <i> <partA> <partB> [fC] [fA] [fb]", lineno)
            i = _int(args[0], lineno)
            check_index(i, lineno, "boundary")
            fr = [_num(a, lineno) for a in args[3:]] + [None] * (6 - len(args))
            boundary.append(
                BoundaryVertex(i, _int(args[1], lineno), _int(args[2], lineno), fr[0], fr[1], fr[2])
            )
        elif key == "parts":
            declared_parts = [_int(a, lineno) for a in args]
        elif key == "window":
            if len(args) != 3:
                raise ProblemError("usage: window <T1> <T2> <h>", lineno)
            t1, t2, h = (_num(a, lineno) for a in args)
            try:
                window = TimeGrid(t1, t2, h)
            except ValueError as exc:
                raise ProblemError(str(exc), lineno) from None
        elif key == "impedance":
            vertex, src = _impedance_source(args, lineno, base_dir)
            if vertex is None:
                z_default = src
            else:
                z_vertex[vertex] = src
        elif key in ("delay", "max_sweeps"):
            if len(args) != 1:
                raise ProblemError(f"usage: {key} <int>", lineno)
            opts[key] = _int(args[0], lineno)
        elif key in ("tol", "divergence_cap"):
            if len(args) != 1:
                raise ProblemError(f"usage: {key} <real>", lineno)
            opts[key] = _num(args[0], lineno)
        elif key == "init":
            if len(args) != 1:
                raise ProblemError("usage: init zero|flat_x0", lineno)
            try:
                opts["init_policy"] = InitialWaveformPolicy(args[0].lower())
            except ValueError:
                raise ProblemError(f"unknown initial-waveform policy {args[0]!r}", lineno) from None
        else:
            raise ProblemError(f"unknown keyword {key!r}", lineno)

    if n is None:
        raise ProblemError("missing 'system n=<int>' line")
    for key in mats:
        if not mats[key]:
            raise ProblemError(f"matrix {key} has no entries")
    if window is None:
        raise ProblemError("missing 'window <T1> <T2> <h>' line")

    def vec(d):
        out = np.zeros(n)
        for i, v in d.items():
            out[i] = v
        return out

    system = OdeSystem(
        C=SymMatrix(n, {k: v for k, (v, _) in mats["C"].items()}),
        A=SymMatrix(n, {k: v for k, (v, _) in mats["A"].items()}),
        b=vec(vecs["b"]),
        x0=vec(vecs["x0"]),
    )
    partition = PartitionSpec(interior, tuple(boundary), declared_parts)
    if not interior and not boundary:
        # no partition lines: the whole system is one part
        partition = PartitionSpec({v: 0 for v in range(n)})
    try:
        config = RunConfig(grid=window, impedance=ImpedanceSpec(z_default, z_vertex), **opts)
    except ValueError as exc:
        raise ProblemError(str(exc)) from None
    return Problem(system, partition, config)


def load_problem(path) -> Problem:
    path = Path(path)
    return parse_problem(path.read_text(encoding="utf-8"), base_dir=path.parent)


def _source_text(src: ImpedanceSource) -> str:
    if src.value is not None:
        return f"const {format_real(src.value)}"
    return f"samples {src.path}"


def format_problem(problem: Problem) -> str:
    """Serialize a problem; :func:`parse_problem` reads it back unchanged."""
    sys, part, cfg = problem.system, problem.partition, problem.config
    g = cfg.grid
    lines = [f"system n={sys.n}"]
    for name, mat in (("C", sys.C), ("A", sys.A)):
        for (i, j), v in mat.entries.items():
            lines.append(f"{name} {i} {j} {format_real(v)}")
    for name, vec in (("b", sys.b), ("x0", sys.x0)):
        for i, v in enumerate(vec):
            if v != 0.0:
                lines.append(f"{name} {i} {format_real(v)}")
    for v, pid in sorted(part.interior.items()):
        lines.append(f"part {v} {pid}")
    for bv in part.boundary:
        fr = [bv.f_c, bv.f_a, bv.f_b]
        # trailing fractions may be omitted, inner ones may not
        while fr and fr[-1] is None:
            fr.pop()
        if any(f is None for f in fr):
            raise ValueError(f"boundary vertex {bv.vertex}: cannot omit an inner fraction")
        lines.append(" ".join([f"boundary {bv.vertex} {bv.part_a} {bv.part_b}"] + [format_real(f) for f in fr]))
    if part.parts is not None:
        lines.append("parts " + " ".join(str(p) for p in part.parts))
    lines.append(f"window {format_real(g.t_start)} {format_real(g.t_end)} {format_real(g.step)}")
    lines.append(f"impedance {_source_text(cfg.impedance.default)}")
    for v, src in sorted(cfg.impedance.per_vertex.items()):
        lines.append(f"impedance {_source_text(src)} at {v}")
    lines.append(f"delay {cfg.delay}")
    lines.append(f"tol {format_real(cfg.tol)}")
    lines.append(f"max_sweeps {cfg.max_sweeps}")
    lines.append(f"init {cfg.init_policy.value}")
    lines.append(f"divergence_cap {format_real(cfg.divergence_cap)}")
    return "\n".join(lines) + "\n"


# Capacitor-resistor demo: C = 3, G = 1.5, u0 = 0 split into C1 = 1, G1 = 0.5
# and C2 = 2, G2 = 1 (fractions 1/3) joined by one line with Z = 1.5 on [0, 1].
# The source b = 3 is split the same way (b1 = 1, b2 = 2).
DEMO_C = 3.0
DEMO_G = 1.5
DEMO_B = 3.0
DEMO_Z = 1.5
DEMO_STEP = 0.01
DEMO_MAX_SWEEPS = 10000


def demo_problem(z: float = DEMO_Z, step: float = DEMO_STEP, max_sweeps: int = DEMO_MAX_SWEEPS) -> Problem:
    system = OdeSystem(
        C=SymMatrix(1, {(0, 0): DEMO_C}),
        A=SymMatrix(1, {(0, 0): DEMO_G}),
        b=[DEMO_B],
        x0=[0.0],
    )
    third = 1.0 / 3.0
    partition = PartitionSpec({}, (BoundaryVertex(0, 1, 2, third, third, third),))
    config = RunConfig(
        grid=TimeGrid(0.0, 1.0, step),
        tol=1e-9,
        max_sweeps=max_sweeps,
        delay=1,
        impedance=ImpedanceSpec.constant(z),
    )
    return Problem(system, partition, config)


def demo_problem_text() -> str:
    header = (
        "# RC demo: C du/dt + G u = b with C=3, G=1.5, u(0)=0, b=3\n"
        "# one vertex split into C1=1/G1=0.5 and C2=2/G2=1, joined by a line with Z=1.5\n"
    )
    return header + format_problem(demo_problem())
