from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

LE, GE, EQ = "<=", ">=", "=="


class LinearProgram:
    """A minimisation LP with named, bounded variables and sparse rows.

    Rows are stored with sorted, de-duplicated column indices. ``constant``
    is added to the objective of every solution.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self.names: list = []
        self.lb: list = []
        self.ub: list = []
        self.cost: list = []
        self.constant = 0.0
        self.row_cols: list = []
        self.row_vals: list = []
        self.senses: list = []
        self.rhs: list = []
        self.row_names: list = []
        self._index: dict = {}
        self.start: Optional[np.ndarray] = None  # optional starting values

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf, cost: float = 0.0) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if not (np.isfinite(cost) and lb <= ub) or np.isnan(lb) or np.isnan(ub):
            raise ValueError(f"bad bounds/cost for {name!r}: [{lb}, {ub}], cost {cost}")
        j = len(self.names)
        self._index[name] = j
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.cost.append(float(cost))
        return j

    def index(self, name: str) -> int:
        return self._index[name]

    def add_cost(self, j: int, value: float):
        self.cost[j] += value

    def add_row(self, coefs, sense: str, rhs: float, name: str = "") -> int:
        """Add ``sum coef * var (sense) rhs``; ``coefs`` maps column -> coefficient."""
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        items = coefs.items() if isinstance(coefs, dict) else coefs
        merged: dict = {}
        for j, v in items:
            if not np.isfinite(v):
                raise ValueError(f"non-finite coefficient in row {name!r}")
            merged[j] = merged.get(j, 0.0) + v
        cols = np.array(sorted(j for j, v in merged.items() if v != 0.0), dtype=np.int64)
        vals = np.array([merged[j] for j in cols], dtype=float)
        if not np.isfinite(rhs):
            raise ValueError(f"non-finite right-hand side in row {name!r}")
        self.row_cols.append(cols)
        self.row_vals.append(vals)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{len(self.rhs) - 1}")
        return len(self.rhs) - 1

    def matrix(self) -> sp.csr_matrix:
        m, n = self.n_rows, self.n_vars
        if m == 0:
            return sp.csr_matrix((0, n))
        indptr = np.zeros(m + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(c) for c in self.row_cols])
        indices = np.concatenate(self.row_cols) if indptr[-1] else np.zeros(0, dtype=np.int64)
        data = np.concatenate(self.row_vals) if indptr[-1] else np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(m, n))

    def arrays(self):
        return (np.array(self.cost, dtype=float), np.array(self.lb, dtype=float),
                np.array(self.ub, dtype=float), np.array(self.rhs, dtype=float))

    def objective_value(self, x) -> float:
        return float(np.dot(self.cost, x)) + self.constant

    def permuted(self, perm) -> "LinearProgram":
        """Copy with variables reordered: new variable ``k`` is old ``perm[k]``."""
        perm = list(perm)
        inv = {old: new for new, old in enumerate(perm)}
        out = LinearProgram(self.name)
        for old in perm:
            out.add_var(self.names[old], self.lb[old], self.ub[old], self.cost[old])
        out.constant = self.constant
        for cols, vals, s, b, nm in zip(self.row_cols, self.row_vals, self.senses, self.rhs, self.row_names):
            out.add_row([(inv[int(j)], v) for j, v in zip(cols, vals)], s, b, nm)
        if self.start is not None:
            out.start = np.asarray(self.start)[perm]
        return out


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float = np.nan
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    activity: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: Optional[np.ndarray] = None
    iterations: int = 0
    names: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, name: str) -> float:
        return float(self.x[self.names.index(name)])


class LPError(RuntimeError):
    """Numerical failure of the solver (not infeasibility or unboundedness)."""


def max_violation(lp: LinearProgram, x, scaled: bool = True) -> float:
    """Largest bound or row violation of ``x``; rows measured after equilibration."""
    x = np.asarray(x, dtype=float)
    _, lb, ub, rhs = lp.arrays()
    worst = float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))
    if lp.n_rows:
        A = lp.matrix()
        act = A @ x
        scale = np.ones(lp.n_rows)
        if scaled:
            rowmax = abs(A).max(axis=1).toarray().ravel()
            scale = np.where(rowmax > 0, 1.0 / np.where(rowmax > 0, rowmax, 1.0), 1.0)
        for i, s in enumerate(lp.senses):
            d = act[i] - rhs[i]
            v = max(d, 0.0) if s == LE else max(-d, 0.0) if s == GE else abs(d)
            worst = max(worst, v * scale[i])
    return worst
