"""CSV outputs of a run: merged solution, convergence curve, twin mismatch."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .orchestrator import Solution
from .waveform import format_real


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def solution_csv(sol: Solution) -> str:
    """``t,v0,v1,...``: one merged waveform per original vertex."""
    header = ["t"] + [f"v{i}" for i in range(len(sol.x))]
    data = sol.as_array()
    rows = [header]
    for t, row in zip(sol.grid.times, data):
        rows.append([format_real(t)] + [format_real(v) for v in row])
    return _csv(rows)


def convergence_csv(sol: Solution) -> str:
    """``sweep,successive_diff[,ref_err_<twin>...]``, one row per sweep."""
    names = []
    if sol.error_curve and sol.error_curve[0].ref_err is not None:
        names = list(sol.error_curve[0].ref_err)
    rows = [["sweep", "successive_diff"] + [f"ref_err_{n}" for n in names]]
    for r in sol.error_curve:
        row = [str(r.sweep), format_real(r.successive_diff)]
        if names:
            row += [format_real(r.ref_err[n]) for n in names]
        rows.append(row)
    return _csv(rows)


def twins_csv(sol: Solution) -> str:
    rows = [["vertex", "part_a", "part_b", "mismatch"]]
    for t in sol.merged.twins:
        rows.append([str(t.vertex), str(t.part_1), str(t.part_2), format_real(t.mismatch)])
    return _csv(rows)


def write_outputs(sol: Solution, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in (
        ("solution.csv", solution_csv(sol)),
        ("convergence.csv", convergence_csv(sol)),
        ("twins.csv", twins_csv(sol)),
    ):
        path = out_dir / name
        path.write_text(text)
        written[name] = path
    return written
