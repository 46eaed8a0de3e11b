"""Fixed-format MPS export."""

from __future__ import annotations

import numpy as np

from .program import EQ, GE, LE, LinearProgram

_ROW_TYPE = {LE: "L", GE: "G", EQ: "E"}


def _num(v: float) -> str:
    s = f"{v:.12g}"
    return s if len(s) <= 12 else f"{v:.6e}"


def write_mps(lp: LinearProgram, path) -> None:
    """Write ``lp`` with generated 8-character names (C0000001, R0000001)."""
    cols = [f"C{j:07d}" for j in range(lp.n_vars)]
    rows = [f"R{i:07d}" for i in range(lp.n_rows)]
    A = lp.matrix().tocsc()
    cost, lb, ub, rhs = lp.arrays()
    out = [f"NAME          {(lp.name or 'LP')[:8]}", "ROWS", " N  COST"]
    out += [f" {_ROW_TYPE[s]}  {r}" for s, r in zip(lp.senses, rows)]
    out.append("COLUMNS")
    for j, c in enumerate(cols):
        if cost[j] != 0.0:
            out.append(f"    {c:<8}  {'COST':<8}  {_num(cost[j]):>12}")
        for p in range(A.indptr[j], A.indptr[j + 1]):
            out.append(f"    {c:<8}  {rows[A.indices[p]]:<8}  {_num(A.data[p]):>12}")
    out.append("RHS")
    for i, r in enumerate(rows):
        if rhs[i] != 0.0:
            out.append(f"    {'RHS':<8}  {r:<8}  {_num(rhs[i]):>12}")
    if lp.constant:
        out.append(f"    {'RHS':<8}  {'COST':<8}  {_num(-lp.constant):>12}")
    out.append("BOUNDS")
    for j, c in enumerate(cols):
        lo, hi = lb[j], ub[j]
        if lo == hi:
            out.append(f" FX BND       {c:<8}  {_num(lo):>12}")
            continue
        if not np.isfinite(lo) and not np.isfinite(hi):
            out.append(f" FR BND       {c}")
            continue
        if not np.isfinite(lo):
            out.append(f" MI BND       {c}")
        elif lo != 0.0:
            out.append(f" LO BND       {c:<8}  {_num(lo):>12}")
        if np.isfinite(hi):
            out.append(f" UP BND       {c:<8}  {_num(hi):>12}")
    out.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
