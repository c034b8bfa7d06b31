"""Kelley's cutting-plane method for bilinear min-max over two polytopes.

Minimizes ``phi(w) = max_{v in Q} w @ M @ v`` over ``w in P``. The inner
maximum is an LP over Q and is attained at a vertex ``v_j``; each
evaluation adds the cut ``t >= (M v_j) @ w`` to a master LP
``min t over w in P``. The master value is a lower bound and the best
evaluated ``phi`` an upper bound. Since Q has finitely many vertices the
method terminates finitely.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .polytope import FeasiblePolytope, lp_optimize, require_feasible


@dataclass
class KelleyResult:
    value: float
    weights: np.ndarray = field(repr=False)
    lower: float
    upper: float
    iterations: int
    converged: bool
    responses: list = field(default_factory=list, repr=False)


def _master(P: FeasiblePolytope, cuts):
    """Standard-form master LP ``min t`` with ``t = t+ - t-`` and cut slacks."""
    A0, b0 = P._A, P._b
    m0, n0 = A0.shape
    k = len(cuts)
    A = np.zeros((m0 + k, n0 + 2 + k))
    A[:m0, :n0] = A0
    N = P.n
    for j, g in enumerate(cuts):
        A[m0 + j, :N] = -g
        A[m0 + j, n0] = 1.0
        A[m0 + j, n0 + 1] = -1.0
        A[m0 + j, n0 + 2 + j] = -1.0
    b = np.concatenate([b0, np.zeros(k)])
    cost = np.zeros(n0 + 2 + k)
    cost[n0], cost[n0 + 1] = 1.0, -1.0
    return cost, A, b


def kelley_minmax(P: FeasiblePolytope, M: np.ndarray, Q: FeasiblePolytope,
                  tol: float = 1e-9, max_iter: int = 5000, w0=None,
                  rule: str = "dantzig") -> KelleyResult:
    """``min_{w in P} max_{v in Q} w @ M @ v`` by Kelley's method.

    Parameters
    ----------
    P, Q : FeasiblePolytope
        Outer (minimizing) and inner (maximizing) polytopes; ``M`` has shape
        ``(P.n, Q.n)``.
    tol : float
        Stop when ``upper - lower <= tol``.
    w0 : array, optional
        First point at which ``phi`` is evaluated (default: a feasible vertex,
        or the uniform weights on a simplex).
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (P.n, Q.n):
        raise ValueError(f"M is {M.shape}, expected {(P.n, Q.n)}")
    start = require_feasible(P, "outer polytope")
    require_feasible(Q, "inner polytope")
    if w0 is None:
        w = np.full(P.n, 1.0 / P.n) if P.is_simplex else start.weights
    else:
        w = np.asarray(w0, dtype=float)
    cuts: list[np.ndarray] = []
    responses: list = []
    seen: set = set()
    upper, lower = np.inf, -np.inf
    best = w
    basis = None
    qbasis = None
    n0 = P._A.shape[1]
    it = 0
    for it in range(1, max_iter + 1):
        v, val = lp_optimize(Q, M.T @ w, "max", basis=qbasis, rule=rule)
        qbasis = v.basis or qbasis
        if val < upper:
            upper, best = val, w
        key = tuple(np.round(v.weights, 15))
        # A repeated response adds no cut; the bounds then meet at this w.
        if key not in seen:
            seen.add(key)
            cuts.append(M @ v.weights)
            responses.append(v)
            if basis is not None:
                basis = basis + [n0 + 2 + len(cuts) - 1]
        if upper - lower <= tol:
            break
        cost, A, b = _master(P, cuts)
        lp = simplex.solve_lp(cost, A, b, basis=basis, rule=rule)
        if lp.status != simplex.OPTIMAL:
            lp = simplex.solve_lp(cost, A, b, rule="bland")
        if lp.status != simplex.OPTIMAL:
            raise RuntimeError(f"Kelley master LP failed: {lp.status}")
        basis = lp.basis if len(lp.basis) == A.shape[0] else None
        lower = max(lower, lp.value)
        w = np.maximum(lp.x[:P.n], 0.0)
        if upper - lower <= tol:
            break
    lower = min(lower, upper)
    return KelleyResult(upper, best, lower, upper, it, upper - lower <= tol, responses)


def kelley_maxmin(P: FeasiblePolytope, M: np.ndarray, Q: FeasiblePolytope,
                  tol: float = 1e-9, max_iter: int = 5000, w0=None,
                  rule: str = "dantzig") -> KelleyResult:
    """``max_{w in P} min_{v in Q} w @ M @ v`` (negated minmax)."""
    r = kelley_minmax(P, -np.asarray(M, dtype=float), Q, tol, max_iter, w0, rule)
    return KelleyResult(-r.value, r.weights, -r.upper, -r.lower, r.iterations,
                        r.converged, r.responses)
