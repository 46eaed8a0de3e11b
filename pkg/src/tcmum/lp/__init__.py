"""Linear programs and the solvers behind them."""

from .program import EQ, GE, LE, LinearProgram, LPError, LPSolution, max_violation
from .simplex import SimplexSolver, solve_lp


class HighsBackend:
    """scipy's HiGHS, for cross-checking the built-in solver."""

    name = "highs"

    def solve(self, lp: LinearProgram) -> LPSolution:
        import numpy as np
        from scipy.optimize import linprog

        cost, lb, ub, rhs = lp.arrays()
        A = lp.matrix()
        senses = np.array(lp.senses, dtype=object)
        le = senses == LE
        ge = senses == GE
        eq = senses == EQ
        A_ub = None
        b_ub = None
        if (le | ge).any():
            sign = np.where(ge, -1.0, 1.0)
            rows = np.flatnonzero(le | ge)
            A_ub = (A[rows].multiply(sign[rows][:, None])).tocsr()
            b_ub = rhs[rows] * sign[rows]
        A_eq = A[np.flatnonzero(eq)] if eq.any() else None
        b_eq = rhs[eq] if eq.any() else None
        bounds = list(zip(np.where(np.isfinite(lb), lb, None), np.where(np.isfinite(ub), ub, None)))
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status == 2:
            return LPSolution("infeasible", names=list(lp.names))
        if res.status == 3:
            return LPSolution("unbounded", names=list(lp.names))
        if res.status != 0:
            raise LPError(res.message)
        x = np.asarray(res.x, dtype=float)
        return LPSolution("optimal", objective=float(cost @ x) + lp.constant, x=x,
                          activity=A @ x if lp.n_rows else np.zeros(0), names=list(lp.names))


BACKENDS = {"simplex": SimplexSolver, "highs": HighsBackend}


def get_backend(name: str = "simplex"):
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown LP backend {name!r}; choose from {sorted(BACKENDS)}") from None


__all__ = [
    "EQ", "GE", "LE", "LinearProgram", "LPError", "LPSolution", "max_violation",
    "SimplexSolver", "HighsBackend", "solve_lp", "get_backend",
]
