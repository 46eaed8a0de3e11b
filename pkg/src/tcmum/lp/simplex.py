"""Bounded primal revised simplex.

Rows become equalities with one slack per row (``<=``: slack >= 0,
``>=``: slack <= 0, ``==``: slack fixed at 0), so the all-slack basis is the
identity. Nonbasic variables may start anywhere inside their bounds (given
by ``LinearProgram.start``); a start that leaves some slack out of bounds
gets an artificial column per offending row and a phase-one pass.

The basis inverse is a sparse LU factorisation (SuperLU) followed by a
product-form eta file, refactored every ``refactor_every`` pivots. Pricing
is Dantzig's rule with a Harris two-pass ratio test; after a run of
degenerate pivots the solver switches to Bland's rule until it makes
progress again.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .program import EQ, GE, LE, LinearProgram, LPError, LPSolution

log = logging.getLogger(__name__)


def _pow2(v):
    return np.exp2(np.round(np.log2(v)))


def _equilibrate(A: sp.csr_matrix):
    """Power-of-two row then column scale factors."""
    m, n = A.shape
    absA = abs(A)
    rmax = absA.max(axis=1).toarray().ravel() if n else np.zeros(m)
    R = np.where(rmax > 0, _pow2(1.0 / np.where(rmax > 0, rmax, 1.0)), 1.0)
    As = sp.diags(R) @ absA
    cmax = As.max(axis=0).toarray().ravel() if m else np.zeros(n)
    C = np.where(cmax > 0, _pow2(1.0 / np.where(cmax > 0, cmax, 1.0)), 1.0)
    return R, C


class _Core:
    """Simplex iterations on ``A x + s = b`` in scaled space."""

    def __init__(self, A: sp.csc_matrix, b, cost, lo, hi, x0, solver: "SimplexSolver", senses):
        self.opts = solver
        m, n = A.shape
        self.m, self.n = m, n
        slack_lo = np.array([0.0 if s in (LE, EQ) else -np.inf for s in senses])
        slack_hi = np.array([np.inf if s == LE else 0.0 for s in senses])
        x = np.empty(n + m)
        x[:n] = x0
        resid = b - A @ x0
        ptol = solver.primal_tol
        bad = (resid < slack_lo - ptol) | (resid > slack_hi + ptol)
        art_rows = np.flatnonzero(bad)
        s_val = np.clip(resid, slack_lo, slack_hi)
        x[n:] = s_val
        art_res = resid[art_rows] - s_val[art_rows]
        art_sign = np.sign(art_res)
        k = len(art_rows)
        self.n_art = k
        art = sp.csc_matrix((art_sign, (art_rows, np.arange(k))), shape=(m, k))
        self.A = sp.hstack([A, sp.identity(m, format="csc"), art], format="csc")
        self.AT_struct = A.T.tocsr()
        self.art_rows, self.art_sign = art_rows, art_sign
        self.b = b
        self.lo = np.concatenate([lo, slack_lo, np.zeros(k)])
        self.hi = np.concatenate([hi, slack_hi, np.full(k, np.inf)])
        self.x = np.concatenate([x, np.abs(art_res)])
        self.cost2 = np.concatenate([cost, np.zeros(m + k)])
        head = np.arange(n, n + m)
        head[art_rows] = n + m + np.arange(k)
        self.head = head
        self.basic = np.zeros(n + m + k, dtype=bool)
        self.basic[head] = True
        self.iterations = 0
        self._factor()

    # -- linear algebra -------------------------------------------------
    def _factor(self):
        B = self.A[:, self.head]
        try:
            self.lu = splu(sp.csc_matrix(B), permc_spec="COLAMD",
                           options={"SymmetricMode": False})
        except RuntimeError as exc:  # singular basis
            raise LPError(f"basis factorisation failed after {self.iterations} iterations: {exc}")
        self.etas = []
        nb = ~self.basic
        r = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.head] = self.lu.solve(r)

    def _column(self, j):
        A = self.A
        v = np.zeros(self.m)
        lo, hi = A.indptr[j], A.indptr[j + 1]
        v[A.indices[lo:hi]] = A.data[lo:hi]
        return v

    def ftran(self, v):
        v = self.lu.solve(v)
        for r, a in self.etas:
            vr = v[r] / a[r]
            v -= a * vr
            v[r] = vr
        return v

    def btran(self, w):
        w = w.copy()
        for r, a in reversed(self.etas):
            wr = w[r]
            w[r] = (wr - (a @ w - a[r] * wr)) / a[r]
        return self.lu.solve(w, trans="T")

    def reduced_costs(self, cost):
        y = self.btran(cost[self.head])
        n, m = self.n, self.m
        d = cost.copy()
        d[:n] -= self.AT_struct @ y
        d[n:n + m] -= y
        if self.n_art:
            d[n + m:] -= self.art_sign * y[self.art_rows]
        return d, y

    # -- iterations -----------------------------------------------------
    def run(self, cost, max_iter):
        o = self.opts
        ptol, dtol, pivtol = o.primal_tol, o.dual_tol, o.pivot_tol
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= max_iter:
                infeas = self.primal_infeasibility()
                raise LPError(f"simplex stalled: {self.iterations} iterations, "
                              f"{len(self.etas)} etas, primal infeasibility {infeas:.3g}")
            d, _ = self.reduced_costs(cost)
            x, lo, hi = self.x, self.lo, self.hi
            can_up = (d < -dtol) & (x < hi - ptol)
            can_down = (d > dtol) & (x > lo + ptol)
            elig = (can_up | can_down) & ~self.basic
            if not elig.any():
                return "optimal"
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                q = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
            direction = 1.0 if can_up[q] else -1.0
            alpha = self.ftran(self._column(q))
            delta = -direction * alpha
            xb = x[self.head]
            lb, ub = lo[self.head], hi[self.head]
            dec = delta < -pivtol
            inc = delta > pivtol
            with np.errstate(divide="ignore", invalid="ignore"):
                t_exact = np.full(self.m, np.inf)
                t_exact[dec] = np.maximum(xb[dec] - lb[dec], 0.0) / -delta[dec]
                t_exact[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / delta[inc]
                t_exact[~np.isfinite(t_exact)] = np.inf
            span = hi[q] - x[q] if direction > 0 else x[q] - lo[q]
            if not np.isfinite(t_exact).any():
                if not np.isfinite(span):
                    return "unbounded"
                r = -1
                t = span
            elif bland:
                tmin = t_exact.min()
                ties = np.flatnonzero(t_exact <= tmin + 1e-12)
                r = int(ties[np.argmin(self.head[ties])])
                t = t_exact[r]
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    relaxed = np.full(self.m, np.inf)
                    relaxed[dec] = (xb[dec] - lb[dec] + ptol) / -delta[dec]
                    relaxed[inc] = (ub[inc] - xb[inc] + ptol) / delta[inc]
                    relaxed[~np.isfinite(relaxed)] = np.inf
                tmax = relaxed.min()
                cand = np.flatnonzero(t_exact <= tmax)
                r = int(cand[np.argmax(np.abs(delta[cand]))])
                t = t_exact[r]
            if r >= 0 and span <= t:
                r = -1
                t = span
            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate > o.bland_after:
                    bland = True
            else:
                degenerate = 0
                bland = False
            x[q] += direction * t
            x[self.head] += delta * t
            if r < 0:
                # bound flip; snap to the bound
                x[q] = hi[q] if direction > 0 else lo[q]
                continue
            p = self.head[r]
            x[p] = lo[p] if delta[r] < 0 else hi[p]
            self.head[r] = q
            self.basic[p] = False
            self.basic[q] = True
            self.etas.append((r, alpha))
            if len(self.etas) >= o.refactor_every:
                self._factor()

    def primal_infeasibility(self):
        xb = self.x[self.head]
        lb, ub = self.lo[self.head], self.hi[self.head]
        return float(max(np.max(lb - xb, initial=0.0), np.max(xb - ub, initial=0.0)))


class SimplexSolver:
    """Built-in LP backend."""

    name = "simplex"

    def __init__(self, primal_tol=1e-9, dual_tol=1e-9, pivot_tol=1e-9, refactor_every=64,
                 bland_after=50, max_iter=None, feasibility_check=1e-7):
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter
        self.feasibility_check = feasibility_check

    def solve(self, lp: LinearProgram) -> LPSolution:
        cost, lb, ub, rhs = lp.arrays()
        n_all = lp.n_vars
        A = lp.matrix()
        senses = np.array(lp.senses, dtype=object)
        x_full = np.zeros(n_all)

        # presolve: fixed columns and empty rows
        fixed = lb == ub
        x_full[fixed] = lb[fixed]
        keep = np.flatnonzero(~fixed)
        b = rhs - (A[:, np.flatnonzero(fixed)] @ lb[fixed] if fixed.any() else 0.0)
        Ak = A[:, keep].tocsr()
        nnz = np.diff(Ak.indptr)
        tol = self.feasibility_check
        for i in np.flatnonzero(nnz == 0):
            s, v = senses[i], b[i]
            if (s == LE and v < -tol) or (s == GE and v > tol) or (s == EQ and abs(v) > tol):
                return LPSolution("infeasible", names=list(lp.names))
        rows = np.flatnonzero(nnz > 0)
        Ak = Ak[rows]
        b = b[rows]
        senses_k = senses[rows]
        ck, lk, uk = cost[keep], lb[keep], ub[keep]
        if lp.start is not None:
            x0 = np.asarray(lp.start, dtype=float)[keep]
        else:
            x0 = np.where(np.isfinite(lk), lk, np.where(np.isfinite(uk), uk, 0.0))
        x0 = np.clip(x0, lk, uk)

        R, C = _equilibrate(Ak)
        As = (sp.diags(R) @ Ak @ sp.diags(C)).tocsc()
        bs = R * b
        cs = ck * C
        ls, us, x0s = lk / C, uk / C, x0 / C
        m, n = As.shape
        max_iter = self.max_iter or 50 * (m + n) + 1000

        core = _Core(As, bs, cs, ls, us, x0s, self, senses_k)
        if core.n_art:
            phase1 = np.zeros(n + m + core.n_art)
            phase1[n + m:] = 1.0
            status = core.run(phase1, max_iter)
            infeas = float(core.x[n + m:].sum())
            if status != "optimal" or infeas > self.feasibility_check:
                return LPSolution("infeasible", iterations=core.iterations, names=list(lp.names))
            core.hi[n + m:] = 0.0
            core.x[n + m:] = np.clip(core.x[n + m:], 0.0, 0.0)
            core._factor()
        status = core.run(core.cost2, max_iter)
        if status == "unbounded":
            return LPSolution("unbounded", iterations=core.iterations, names=list(lp.names))
        core._factor()
        viol = core.primal_infeasibility()
        if viol > self.feasibility_check:
            raise LPError(f"final basis infeasible by {viol:.3g} after {core.iterations} iterations")
        xs = np.clip(core.x[:n], ls, us)
        x_full[keep] = xs * C
        _, y = core.reduced_costs(core.cost2)
        duals = np.zeros(lp.n_rows)
        duals[rows] = y * R
        act = A @ x_full if lp.n_rows else np.zeros(0)
        return LPSolution(
            status="optimal",
            objective=float(cost @ x_full) + lp.constant,
            x=x_full,
            activity=act,
            duals=duals,
            iterations=core.iterations,
            names=list(lp.names),
        )


def solve_lp(model: LinearProgram, backend=None) -> LPSolution:
    """Solve ``model`` with ``backend`` (the built-in simplex by default)."""
    return (backend or SimplexSolver()).solve(model)
