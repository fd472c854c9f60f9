"""The electric graph of ``C dx/dt + A x = b``: symmetric matrices and validity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a validation check. Truthy iff the check passed."""

    ok: bool
    reasons: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok

    @property
    def reason(self) -> str:
        return "; ".join(self.reasons)

    @classmethod
    def passed(cls):
        return cls(True)

    @classmethod
    def failed(cls, *reasons: str):
        return cls(False, tuple(reasons))


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Symmetric matrix stored as its upper triangle, ``{(i, j): value}`` with ``i <= j``."""

    n: int
    entries: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"matrix dimension must be positive, got {self.n}")
        clean = {}
        for (i, j), v in self.entries.items():
            i, j = int(i), int(j)
            if i > j:
                raise ValueError(f"entry ({i},{j}) lies below the diagonal; store (j,i)")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"entry ({i},{j}) out of range for n={self.n}")
            if not math.isfinite(v):
                raise ValueError(f"entry ({i},{j}) is not finite")
            clean[(i, j)] = float(v)
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    @classmethod
    def from_dense(cls, m, drop_zeros: bool = True) -> "SymMatrix":
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("dense matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("dense matrix is not symmetric")
        n = m.shape[0]
        entries = {
            (i, j): float(m[i, j])
            for i in range(n)
            for j in range(i, n)
            if not (drop_zeros and m[i, j] == 0.0)
        }
        return cls(n, entries)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for (i, j), v in self.entries.items():
            out[i, j] = v
            out[j, i] = v
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        for (i, j), v in self.entries.items():
            if i == j:
                d[i] = v
        return d

    def off_diagonal(self) -> Iterable[tuple[int, int, float]]:
        return ((i, j, v) for (i, j), v in self.entries.items() if i != j and v != 0.0)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self.n == other.n and self.entries == other.entries

    def __repr__(self):
        return f"SymMatrix(n={self.n}, nnz={len(self.entries)})"


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """``C dx/dt + A x = b`` with ``x(T1) = x0``."""

    C: SymMatrix
    A: SymMatrix
    b: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        for name in ("b", "x0"):
            v = np.array(getattr(self, name), dtype=float)
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.C.n

    def __eq__(self, other):
        if not isinstance(other, OdeSystem):
            return NotImplemented
        return (
            self.C == other.C
            and self.A == other.A
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.x0, other.x0)
        )


def _scale(dense: np.ndarray) -> float:
    return float(np.max(np.abs(np.diag(dense)))) if dense.size else 0.0


def validate_spd(m: SymMatrix) -> CheckResult:
    """Cholesky on the dense expansion; every pivot must exceed a relative tolerance."""
    dense = m.to_dense()
    tol = 1e-14 * _scale(dense)
    try:
        chol = np.linalg.cholesky(dense)
    except np.linalg.LinAlgError:
        return CheckResult.failed("Cholesky factorization broke down (not positive definite)")
    pivots = np.diag(chol) ** 2
    k = int(np.argmin(pivots))
    if pivots[k] <= tol:
        return CheckResult.failed(f"pivot {k} is {pivots[k]:.3e}, not above {tol:.3e}")
    return CheckResult.passed()


def validate_snnd(m: SymMatrix) -> CheckResult:
    """Pass iff the smallest eigenvalue is >= ``-1e-10 * max|diag|``."""
    dense = m.to_dense()
    tol = 1e-10 * _scale(dense)
    lam = float(np.linalg.eigvalsh(dense)[0])
    if lam < -tol:
        return CheckResult.failed(f"smallest eigenvalue {lam:.6g} is negative")
    return CheckResult.passed()


def validate_system(sys: OdeSystem) -> CheckResult:
    reasons = []
    n = sys.C.n
    if sys.A.n != n:
        reasons.append(f"dimension: A is {sys.A.n}x{sys.A.n}, C is {n}x{n}")
    if sys.b.shape != (n,):
        reasons.append(f"dimension: b has length {sys.b.size}, expected {n}")
    if sys.x0.shape != (n,):
        reasons.append(f"dimension: x0 has length {sys.x0.size}, expected {n}")
    for name, v in (("b", sys.b), ("x0", sys.x0)):
        if not np.all(np.isfinite(v)):
            reasons.append(f"{name} contains non-finite values")
    for name, mat in (("C", sys.C), ("A", sys.A)):
        r = validate_spd(mat)
        if not r:
            reasons.append(f"SPD check failed for {name}: {r.reason}")
    return CheckResult.failed(*reasons) if reasons else CheckResult.passed()
