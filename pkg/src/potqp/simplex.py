"""Dense two-phase tableau simplex for small standard-form LPs.

Solves ``min c @ x  s.t.  A @ x = b, x >= 0``. The tableau is a plain
numpy array; pivots are rank-one updates. Bland's rule (smallest index
entering, smallest basic index on ratio ties) is the default and guarantees
termination. ``rule="dantzig"`` picks the most negative reduced cost and
falls back to Bland after a run of degenerate pivots.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    value: float = np.nan
    basis: list[int] = field(default_factory=list)
    # Equality-row duals y with A.T @ y <= c at optimum.
    duals: np.ndarray | None = None
    # Farkas vector for infeasible problems: y @ A <= 0 and y @ b > 0.
    certificate: np.ndarray | None = None
    certificate_residual: float = np.nan
    redundant_rows: list[int] = field(default_factory=list)
    pivots: int = 0


class _Tableau:
    """Rows 0..m-1 hold B^-1 [A | b]; row m holds reduced costs and -z."""

    def __init__(self, T, basis, tol, pivot_tol, rule):
        self.T = T
        self.basis = list(basis)
        self.tol = tol
        self.pivot_tol = pivot_tol
        self.rule = rule
        self.pivots = 0

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, i, j):
        T = self.T
        row = T[i] / T[i, j]
        col = T[:, j].copy()
        T -= np.outer(col, row)
        T[i] = row
        T[:, j] = 0.0
        T[i, j] = 1.0
        self.basis[i] = j
        self.pivots += 1

    def _entering(self, allowed, use_bland):
        r = self.T[-1, :-1]
        cand = np.flatnonzero((r < -self.tol) & allowed)
        if cand.size == 0:
            return None
        if use_bland:
            return int(cand[0])
        return int(cand[np.argmin(r[cand])])

    def _leaving(self, j):
        col = self.T[:-1, j]
        rhs = self.T[:-1, -1]
        rows = np.flatnonzero(col > self.pivot_tol)
        if rows.size == 0:
            return None
        ratios = np.maximum(rhs[rows], 0.0) / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
        return int(min(ties, key=lambda i: self.basis[i]))

    def run(self, allowed, max_pivots):
        degenerate = 0
        while self.pivots < max_pivots:
            use_bland = self.rule == "bland" or degenerate > 25
            j = self._entering(allowed, use_bland)
            if j is None:
                return OPTIMAL
            i = self._leaving(j)
            if i is None:
                return UNBOUNDED
            if self.T[i, -1] <= self.tol:
                degenerate += 1
            else:
                degenerate = 0
            self.pivot(i, j)
            self.T[:-1, -1] = np.maximum(self.T[:-1, -1], 0.0)
        return ITERATION_LIMIT

    def run_dual(self, max_pivots):
        """Dual simplex from a dual-feasible basis until primal feasible."""
        while self.pivots < max_pivots:
            rhs = self.T[:-1, -1]
            i = int(np.argmin(rhs))
            if rhs[i] >= -self.tol:
                return OPTIMAL
            row = self.T[i, :-1]
            cand = np.flatnonzero(row < -self.pivot_tol)
            if cand.size == 0:
                return INFEASIBLE
            r = np.maximum(self.T[-1, cand], 0.0) / -row[cand]
            best = r.min()
            j = int(cand[np.flatnonzero(r <= best + self.tol * max(1.0, best))[0]])
            self.pivot(i, j)
        return ITERATION_LIMIT


def _price(T, basis, cost):
    """Overwrite the objective row with reduced costs for ``cost``."""
    m = T.shape[0] - 1
    cb = cost[basis]
    T[-1, :-1] = cost - cb @ T[:m, :-1]
    T[-1, -1] = -(cb @ T[:m, -1])


def _reinvert(A, b, basis):
    B = A[:, basis]
    try:
        body = np.linalg.solve(B, np.column_stack([A, b]))
    except np.linalg.LinAlgError:
        return None
    return body


def solve_lp(c, A, b, *, basis=None, rule="bland", tol=1e-9, pivot_tol=1e-9,
             max_pivots=None) -> LPResult:
    """Minimize ``c @ x`` over ``{x >= 0 : A @ x = b}``.

    Parameters
    ----------
    c, A, b : array_like
        Standard-form data; ``A`` is ``(m, n)``.
    basis : sequence of int, optional
        Warm-start basis. Used if it is nonsingular and either primal
        feasible (primal simplex) or dual feasible (dual simplex first, as
        after appending a cut row with its slack basic); otherwise the
        solve falls back to phase 1.
    rule : {"bland", "dantzig"}
        Entering-variable rule.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if max_pivots is None:
        max_pivots = 50 * (m + n) + 1000

    if basis is not None and len(basis) == m and m > 0:
        body = _reinvert(A, b, list(basis))
        if body is not None:
            T = np.zeros((m + 1, n + 1))
            T[:m] = body
            _price(T, list(basis), c)
            primal_ok = body[:, -1].min() >= -tol
            dual_ok = T[-1, :-1].min() >= -tol
            if primal_ok or dual_ok:
                tab = _Tableau(T, basis, tol, pivot_tol, rule)
                if not primal_ok:
                    status = tab.run_dual(max_pivots)
                    if status == INFEASIBLE:
                        tab = None
                if tab is not None:
                    tab.T[:m, -1] = np.maximum(tab.T[:m, -1], 0.0)
                    status = tab.run(np.ones(n, dtype=bool), max_pivots)
                    return _finish(tab, status, A, b, c, n, list(range(m)), [])

    # Phase 1 with one artificial per row.
    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = As
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = bs
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis1 = list(range(n, n + m))
    _price(T, basis1, cost1)
    tab = _Tableau(T, basis1, tol, pivot_tol, rule)
    tab.run(np.ones(n + m, dtype=bool), max_pivots)
    infeas = -tab.T[-1, -1]
    scale = max(1.0, np.abs(bs).max(initial=0.0))
    if infeas > 1e-8 * scale:
        y = (1.0 - tab.T[-1, n:n + m]) * sign
        resid = float(max(0.0, (y @ A).max(initial=0.0)))
        return LPResult(INFEASIBLE, certificate=y, certificate_residual=resid,
                        value=np.inf, pivots=tab.pivots)

    # Drive artificials out; rows where that is impossible are redundant.
    redundant = []
    for i in range(m):
        if tab.basis[i] >= n:
            row = tab.T[i, :n]
            cand = np.flatnonzero(np.abs(row) > 1e-7)
            cand = [j for j in cand if j not in tab.basis]
            if cand:
                tab.pivot(i, int(cand[0]))
            else:
                redundant.append(i)
    keep = [i for i in range(m) if i not in redundant]
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = tab.T[keep, :n]
    T2[:-1, -1] = np.maximum(tab.T[keep, -1], 0.0)
    basis2 = [tab.basis[i] for i in keep]
    _price(T2, basis2, c)
    tab2 = _Tableau(T2, basis2, tol, pivot_tol, rule)
    tab2.pivots = tab.pivots
    status = tab2.run(np.ones(n, dtype=bool), max_pivots)
    return _finish(tab2, status, A, b, c, n, keep, redundant)


def _finish(tab, status, A, b, c, n, keep, redundant):
    m = len(keep)
    x = np.zeros(n)
    basis = list(tab.basis)
    Ak = A[keep]
    bk = b[keep]
    # Recompute basic values from the original data to shed pivot drift.
    try:
        xb = np.linalg.solve(Ak[:, basis], bk) if m else np.zeros(0)
        if xb.min(initial=0.0) < -1e-9 * max(1.0, np.abs(bk).max(initial=0.0)):
            xb = tab.T[:-1, -1]
    except np.linalg.LinAlgError:
        xb = tab.T[:-1, -1]
    x[basis] = np.maximum(xb, 0.0)
    duals = np.zeros(A.shape[0])
    if m:
        try:
            duals[keep] = np.linalg.solve(Ak[:, basis].T, c[basis])
        except np.linalg.LinAlgError:
            pass
    return LPResult(status, x=x, value=float(c @ x), basis=basis, duals=duals,
                    redundant_rows=redundant, pivots=tab.pivots)
