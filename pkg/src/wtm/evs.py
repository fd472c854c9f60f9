"""Electric vertex splitting.

Each boundary vertex is duplicated into a pair of twins, one in each of the
two parts it separates. The twins share the vertex's diagonal capacitance,
conductance and source by configurable fractions; every off-diagonal edge
follows its interior endpoint. Summing the twins back together reproduces
the original system exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .electric_graph import OdeSystem, SymMatrix, validate_snnd
from .waveform import Waveform, wf_max_abs_diff


class SplitError(ValueError):
    """The partition is illegal for the system, or a produced subgraph is invalid."""


@dataclass(frozen=True)
class BoundaryVertex:
    vertex: int
    part_a: int
    part_b: int
    # None means "use default_fractions"
    f_c: float | None = None
    f_a: float | None = None
    f_b: float | None = None


@dataclass(frozen=True)
class PartitionSpec:
    interior: Mapping[int, int]
    boundary: Sequence[BoundaryVertex] = ()
    # optional explicit part list; a declared part that receives no vertex is an error
    parts: Sequence[int] | None = None

    def part_ids(self) -> list[int]:
        ids = set(self.interior.values())
        for bv in self.boundary:
            ids.update((bv.part_a, bv.part_b))
        if self.parts is not None:
            ids.update(self.parts)
        return sorted(ids)


@dataclass(frozen=True)
class Port:
    local: int
    wtl_id: int
    side: int  # 1 or 2: which end of the line this port is


@dataclass(frozen=True, eq=False)
class Subproblem:
    part: int
    local_index: Mapping[int, int]  # global vertex -> local row
    C: SymMatrix
    A: SymMatrix
    b: np.ndarray
    x0: np.ndarray
    ports: tuple[Port, ...] = ()

    @property
    def n(self) -> int:
        return self.C.n

    @property
    def global_index(self) -> list[int]:
        out = [0] * len(self.local_index)
        for g, l in self.local_index.items():
            out[l] = g
        return out


@dataclass(frozen=True)
class TwinPair:
    wtl_id: int
    vertex: int
    part_1: int
    local_1: int
    part_2: int
    local_2: int


def _share(mat: SymMatrix, v: int, part_a: int, interior: Mapping[int, int]) -> float | None:
    """Fraction of ``v``'s off-diagonal weight in ``mat`` going into ``part_a``; None if isolated."""
    into_a = total = 0.0
    for i, j, val in mat.off_diagonal():
        if v in (i, j):
            u = j if i == v else i
            total += abs(val)
            if interior.get(u) == part_a:
                into_a += abs(val)
    if total == 0.0:
        return None
    return min(max(into_a / total, 0.1), 0.9)


def default_fractions(sys: OdeSystem, v: int, part_a: int, part_b: int,
                      interior: Mapping[int, int]) -> tuple[float, float, float]:
    """Share of vertex ``v`` assigned to ``part_a``, as ``(fC, fA, fb)``.

    ``fA`` is the off-diagonal conductance from ``v`` into ``part_a`` over
    its total, clamped to [0.1, 0.9], or 0.5 when ``v`` has no conductance
    neighbours. ``fC`` is computed the same way from C when ``v`` has
    capacitive neighbours and equals ``fA`` otherwise; ``fb`` equals ``fA``.
    """
    fa = _share(sys.A, v, part_a, interior)
    fa = 0.5 if fa is None else fa
    fc = _share(sys.C, v, part_a, interior)
    return (fa if fc is None else fc), fa, fa


def resolve_fractions(sys: OdeSystem, p: PartitionSpec, bv: BoundaryVertex) -> tuple[float, float, float]:
    dc, da, db = default_fractions(sys, bv.vertex, bv.part_a, bv.part_b, p.interior)
    return (
        dc if bv.f_c is None else bv.f_c,
        da if bv.f_a is None else bv.f_a,
        db if bv.f_b is None else bv.f_b,
    )


def check_partition(sys: OdeSystem, p: PartitionSpec):
    """Raise :class:`SplitError` if ``p`` is not a legal vertex separator of ``sys``."""
    n = sys.n
    boundary = {}
    for bv in p.boundary:
        if bv.vertex in boundary:
            raise SplitError(f"vertex {bv.vertex} listed twice as boundary")
        if bv.part_a == bv.part_b:
            raise SplitError(f"boundary vertex {bv.vertex} must separate two distinct parts")
        for name, f in (("fC", bv.f_c), ("fA", bv.f_a), ("fb", bv.f_b)):
            if f is not None and not 0.0 <= f <= 1.0:
                raise SplitError(f"boundary vertex {bv.vertex}: {name}={f} outside [0, 1]")
        boundary[bv.vertex] = bv
    for v in list(p.interior) + list(boundary):
        if not 0 <= v < n:
            raise SplitError(f"vertex {v} out of range for n={n}")
    both = set(p.interior) & set(boundary)
    if both:
        raise SplitError(f"vertex {min(both)} is both interior and boundary")
    missing = set(range(n)) - set(p.interior) - set(boundary)
    if missing:
        raise SplitError(f"vertex {min(missing)} is not assigned to any part")

    for mat_name, mat in (("C", sys.C), ("A", sys.A)):
        for i, j, _ in mat.off_diagonal():
            if i in boundary and j in boundary:
                raise SplitError(
                    f"edge ({i},{j}) in {mat_name} joins two boundary vertices; "
                    "the separator must be an independent set"
                )
            if i in p.interior and j in p.interior:
                if p.interior[i] != p.interior[j]:
                    raise SplitError(
                        f"edge ({i},{j}) in {mat_name} crosses parts "
                        f"{p.interior[i]} and {p.interior[j]} without a boundary vertex"
                    )
                continue
            bv, u = (boundary[i], j) if i in boundary else (boundary[j], i)
            if p.interior[u] not in (bv.part_a, bv.part_b):
                raise SplitError(
                    f"boundary vertex {bv.vertex} touches part {p.interior[u]} via vertex {u}, "
                    f"but only separates parts {bv.part_a} and {bv.part_b}"
                )

    members = {pid: 0 for pid in p.part_ids()}
    for pid in p.interior.values():
        members[pid] += 1
    for bv in boundary.values():
        members[bv.part_a] += 1
        members[bv.part_b] += 1
    empty = [pid for pid, count in members.items() if count == 0]
    if empty:
        raise SplitError(f"part {empty[0]} has no vertices")


def split(sys: OdeSystem, p: PartitionSpec) -> tuple[list[Subproblem], list[TwinPair]]:
    """Split ``sys`` along the boundary of ``p``.

    Returns subproblems in ascending part-id order and one twin pair per
    boundary vertex (ascending vertex order; the pair index is the WTL id).
    """
    check_partition(sys, p)
    parts = p.part_ids()
    boundary = {bv.vertex: bv for bv in sorted(p.boundary, key=lambda bv: bv.vertex)}
    fractions = {v: resolve_fractions(sys, p, bv) for v, bv in boundary.items()}

    members = {pid: [] for pid in parts}
    for v in range(sys.n):
        if v in boundary:
            members[boundary[v].part_a].append(v)
            members[boundary[v].part_b].append(v)
        else:
            members[p.interior[v]].append(v)
    local = {pid: {g: l for l, g in enumerate(vs)} for pid, vs in members.items()}

    def owner(i: int, j: int) -> int:
        # an off-diagonal edge belongs to the part of its interior endpoint
        return p.interior[i] if i in p.interior else p.interior[j]

    def distribute(mat: SymMatrix, which: int) -> dict[int, dict]:
        out = {pid: {} for pid in parts}
        for (i, j), val in mat.entries.items():
            if i != j and val == 0.0:
                continue
            if i == j and i in boundary:
                bv = boundary[i]
                f = fractions[i][which]
                la, lb = local[bv.part_a][i], local[bv.part_b][i]
                out[bv.part_a][(la, la)] = f * val
                out[bv.part_b][(lb, lb)] = (1.0 - f) * val
            else:
                pid = owner(i, j)
                li, lj = local[pid][i], local[pid][j]
                out[pid][(min(li, lj), max(li, lj))] = val
        return out

    c_parts = distribute(sys.C, 0)
    a_parts = distribute(sys.A, 1)

    pairs = []
    ports = {pid: [] for pid in parts}
    for wtl_id, (v, bv) in enumerate(boundary.items()):
        l1, l2 = local[bv.part_a][v], local[bv.part_b][v]
        pairs.append(TwinPair(wtl_id, v, bv.part_a, l1, bv.part_b, l2))
        ports[bv.part_a].append(Port(l1, wtl_id, 1))
        ports[bv.part_b].append(Port(l2, wtl_id, 2))

    subs = []
    for pid in parts:
        vs = members[pid]
        b = np.empty(len(vs))
        for l, g in enumerate(vs):
            if g in boundary:
                fb = fractions[g][2]
                b[l] = sys.b[g] * (fb if boundary[g].part_a == pid else 1.0 - fb)
            else:
                b[l] = sys.b[g]
        sub = Subproblem(
            part=pid,
            local_index=local[pid],
            C=SymMatrix(len(vs), c_parts[pid]),
            A=SymMatrix(len(vs), a_parts[pid]),
            b=b,
            x0=sys.x0[vs].copy(),
            ports=tuple(ports[pid]),
        )
        for name, mat in (("C", sub.C), ("A", sub.A)):
            r = validate_snnd(mat)
            if not r:
                raise SplitError(f"part {pid}: {name} is not non-negative definite ({r.reason})")
        subs.append(sub)
    return subs, pairs


def reconstruct(subs: Sequence[Subproblem], n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge twins back into single vertices: dense ``(C, A, b)`` of the original size."""
    C = np.zeros((n, n))
    A = np.zeros((n, n))
    b = np.zeros(n)
    for sub in subs:
        g = sub.global_index
        idx = np.ix_(g, g)
        C[idx] += sub.C.to_dense()
        A[idx] += sub.A.to_dense()
        np.add.at(b, g, sub.b)
    return C, A, b


@dataclass
class TwinReport:
    vertex: int
    part_1: int
    part_2: int
    u_1: Waveform
    u_2: Waveform
    mismatch: float


@dataclass
class MergedSolution:
    x: list[Waveform]
    twins: list[TwinReport] = field(default_factory=list)

    @property
    def max_twin_mismatch(self) -> float:
        return max((t.mismatch for t in self.twins), default=0.0)


def merge_solution(subs: Sequence[Subproblem], pairs: Sequence[TwinPair],
                   waveforms: Mapping[int, Sequence[Waveform]], n: int) -> MergedSolution:
    """Assemble per-part waveforms into one waveform per original vertex.

    Interior vertices map straight through; a split vertex gets the average
    of its two twins, and the twin gap is reported.
    """
    by_part = {s.part: s for s in subs}
    for pid in by_part:
        if pid not in waveforms:
            raise KeyError(f"no waveforms for part {pid}")
    x: list[Waveform | None] = [None] * n
    for sub in subs:
        wfs = waveforms[sub.part]
        if len(wfs) != sub.n:
            raise KeyError(f"part {sub.part}: {len(wfs)} waveforms for {sub.n} local vertices")
        for g, l in sub.local_index.items():
            x[g] = wfs[l]
    twins = []
    for pair in pairs:
        u1 = waveforms[pair.part_1][pair.local_1]
        u2 = waveforms[pair.part_2][pair.local_2]
        x[pair.vertex] = Waveform(u1.grid, 0.5 * (u1.samples + u2.samples))
        twins.append(TwinReport(pair.vertex, pair.part_1, pair.part_2, u1, u2, wf_max_abs_diff(u1, u2)))
    if any(w is None for w in x):
        raise KeyError(f"vertex {x.index(None)} has no waveform")
    return MergedSolution(x, twins)
