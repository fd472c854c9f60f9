"""Shared builders and oracles for the test suite."""

import numpy as np

from wtm.electric_graph import OdeSystem, SymMatrix
from wtm.evs import BoundaryVertex, PartitionSpec
from wtm.waveform import Waveform
from wtm.wtl import PortState


def demo_system(b=3.0):
    return OdeSystem(SymMatrix(1, {(0, 0): 3.0}), SymMatrix(1, {(0, 0): 1.5}), [b], [0.0])


def demo_partition():
    third = 1.0 / 3.0
    return PartitionSpec({}, (BoundaryVertex(0, 1, 2, third, third, third),))


def demo_closed_form(t):
    # C u' + G u = b, u(0) = 0  ->  u = (b/G)(1 - exp(-G t / C))
    return 2.0 * (1.0 - np.exp(-0.5 * np.asarray(t)))


def chain_system(n, c=1.0, g=1.0, g0=0.5, sources=None, x0=None):
    """RC ladder: unit capacitors to ground, conductance g between neighbours, g0 to ground."""
    C = {(i, i): c for i in range(n)}
    A = {}
    for i in range(n):
        deg = (i > 0) + (i < n - 1)
        A[(i, i)] = g0 + g * deg
        if i < n - 1:
            A[(i, i + 1)] = -g
    b = np.zeros(n)
    for i, v in (sources or {0: 1.0}).items():
        b[i] = v
    return OdeSystem(SymMatrix(n, C), SymMatrix(n, A), b, np.zeros(n) if x0 is None else x0)


def chain_partition(n, separators):
    """Parts 0, 1, ... between consecutive separator vertices of a chain."""
    interior = {}
    boundary = []
    part = 0
    for v in range(n):
        if v in separators:
            boundary.append(BoundaryVertex(v, part, part + 1))
            part += 1
        else:
            interior[v] = part
    return PartitionSpec(interior, tuple(boundary))


def random_partitioned_system(rng, n, n_parts=None, density=0.4):
    """Random strictly diagonally dominant SPD system with a legal separator.

    The partition is drawn first and only edges it allows are generated:
    interior-interior within one part, and boundary-to-interior into one of
    the boundary vertex's two parts. Diagonals are at least twice the row's
    off-diagonal sum.
    """
    if n_parts is None:
        n_parts = int(rng.integers(2, 5))
    part = [int(p) for p in rng.permutation(np.arange(n) % n_parts)]
    is_boundary = rng.random(n) < 0.3
    # keep at least one interior vertex per part
    for pid in range(n_parts):
        members = [v for v in range(n) if part[v] == pid]
        if members and all(is_boundary[v] for v in members):
            is_boundary[members[0]] = False
    other = {}
    for v in np.flatnonzero(is_boundary):
        choices = [q for q in range(n_parts) if q != part[v]]
        other[int(v)] = int(rng.choice(choices))

    def allowed(i, j):
        if is_boundary[i] and is_boundary[j]:
            return False
        if not is_boundary[i] and not is_boundary[j]:
            return part[i] == part[j]
        bv, u = (i, j) if is_boundary[i] else (j, i)
        return part[u] in (part[bv], other[bv])

    mats = []
    for _ in range(2):
        M = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if allowed(i, j) and rng.random() < density:
                    M[i, j] = M[j, i] = rng.uniform(0.1, 2.0) * rng.choice([-1.0, -1.0, 1.0])
        for i in range(n):
            M[i, i] = 2.0 * np.abs(M[i]).sum() + rng.uniform(0.1, 1.0)
        mats.append(M)
    sys = OdeSystem(
        SymMatrix.from_dense(mats[0]),
        SymMatrix.from_dense(mats[1]),
        rng.uniform(-1, 1, n),
        rng.uniform(-1, 1, n),
    )
    interior = {v: part[v] for v in range(n) if not is_boundary[v]}
    boundary = tuple(BoundaryVertex(v, part[v], other[v]) for v in sorted(other))
    return sys, PartitionSpec(interior, boundary)


def proportional_fractions(sys, p):
    """Per-matrix fractions equal to each matrix's own off-diagonal share into part_a.

    Keeps both twins diagonally dominant, so every subgraph stays SNND.
    """
    C, A = sys.C.to_dense(), sys.A.to_dense()
    out = []
    for bv in p.boundary:
        fr = []
        for M in (C, A):
            row = np.abs(M[bv.vertex]).copy()
            row[bv.vertex] = 0.0
            tot = row.sum()
            into_a = sum(row[u] for u, pid in p.interior.items() if pid == bv.part_a)
            fr.append(0.5 if tot == 0 else min(into_a / tot, 1.0))
        out.append(BoundaryVertex(bv.vertex, bv.part_a, bv.part_b, fr[0], fr[1], 0.5))
    return PartitionSpec(p.interior, tuple(out))


def fixed_point_port_states(subs, pairs, ref, grid):
    """Port states of the exact discrete fixed point built from the monolithic solution.

    Both twins carry the reference potential. The current into the part-1
    twin is that subgraph's backward-Euler residual at the twin row, and
    the part-2 twin gets its negative. Returns ``{wtl_id: (port1, port2)}``.
    """
    h = grid.step
    by_part = {s.part: s for s in subs}
    states = {}
    for pair in pairs:
        sub = by_part[pair.part_1]
        X = np.column_stack([ref[g].samples for g in sub.global_index])
        C, A = sub.C.to_dense(), sub.A.to_dense()
        r = pair.local_1
        i1 = np.zeros(grid.n_points)
        for m in range(1, grid.n_points):
            i1[m] = C[r] @ (X[m] - X[m - 1]) / h + A[r] @ X[m] - sub.b[r]
        u = ref[pair.vertex]
        states[pair.wtl_id] = (
            PortState(u, Waveform(grid, i1)),
            PortState(u, Waveform(grid, -i1)),
        )
    return states


def leading_minors_positive(M):
    """Exact-rational Sylvester test."""
    from fractions import Fraction

    n = len(M)
    F = [[Fraction(float(M[i][j])) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        if _det([row[:k] for row in F[:k]]) <= 0:
            return False
    return True


def _det(M):
    M = [row[:] for row in M]
    n = len(M)
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            for k in range(c, n):
                M[r][k] -= f * M[c][k]
    return det


def closed_form_scalar(c, g, b, u0, t):
    """Exact solution of c u' + g u = b."""
    t = np.asarray(t)
    ss = b / g
    return ss + (u0 - ss) * np.exp(-g * t / c)

