"""Discrete energy minimization ``min w @ K @ w`` over a moment polytope,
and the reduction of general quadratic-plus-linear problems to it.

The solver is Frank-Wolfe with exact line search, using
``polytope.lp_optimize`` as the linear minimization oracle. Because the
conditional-gradient rate is sublinear, the default run finishes with a
primal active-set phase on the same QP (``polish=True``): starting from the
Frank-Wolfe iterate it solves the equality-constrained subproblems exactly
and releases or fixes bounds until the KKT conditions hold. Both phases are
descent methods, so the energy history is nonincreasing.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernel import EnergyMatrix, Kernel, as_grid
from .polytope import (GEQ, FeasiblePolytope, InfeasibleError, Vertex,
                       check_feasible, lp_optimize, require_feasible)


@dataclass
class SolveReport:
    """Result of an energy minimization.

    ``value`` is ``w @ K @ w`` with the matrix as stored; ``unshifted`` removes
    the kernel's constant shift (``value - shift * mass**2``).
    ``duality_gap`` is the Frank-Wolfe gap ``grad @ (w - s)`` at the final
    point, a certified bound ``value - optimum <= gap`` when K is positive
    semidefinite. ``local`` marks runs on indefinite matrices, where the gap
    only certifies stationarity.
    """

    value: float
    weights: np.ndarray = field(repr=False)
    kkt_residual: float
    feasibility_residual: float
    iterations: int
    duality_gap: float
    unshifted: float = np.nan
    local: bool = False
    converged: bool = True
    polish_steps: int = 0
    history: list = field(default_factory=list, repr=False)
    basis: list = field(default_factory=list, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def to_text(self) -> str:
        lines = [
            f"value = {self.value!r}",
            f"unshifted_value = {self.unshifted!r}",
            f"duality_gap = {self.duality_gap!r}",
            f"kkt_residual = {self.kkt_residual!r}",
            f"feasibility_residual = {self.feasibility_residual!r}",
            f"iterations = {self.iterations}",
            f"polish_steps = {self.polish_steps}",
            f"support_size = {self.support.size}",
            f"converged = {self.converged}",
            f"certificate = {'local (indefinite matrix)' if self.local else 'global (PSD)'}",
        ]
        return "\n".join(lines) + "\n"


def _matrix_of(K) -> tuple[np.ndarray, float]:
    if isinstance(K, EnergyMatrix):
        return K.entries, K.shift
    return np.asarray(K, dtype=float), 0.0


def _quad(K, w) -> float:
    return math.fsum(w * (K @ w))


def is_positive_definite(K: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(K)
        return True
    except np.linalg.LinAlgError:
        return False


def is_positive_semidefinite(K: np.ndarray, tol=1e-12) -> bool:
    if is_positive_definite(K):
        return True
    lo = np.linalg.eigvalsh(K)[0]
    return lo >= -tol * max(1.0, np.abs(K).max())


def _initial_point(K, p: FeasiblePolytope, w0):
    if w0 is not None:
        w0 = np.asarray(w0, dtype=float)
        if w0.shape == (p.n,) and p.residual(w0) <= 1e-10 * p.row_scale():
            return np.maximum(w0, 0.0), None
    if p.is_simplex:
        w = np.zeros(p.n)
        w[int(np.argmin(np.diag(K)))] = 1.0
        return w, None
    v = require_feasible(p, "energy polytope")
    return v.weights.copy(), v.basis


def minimize_energy(K, p: FeasiblePolytope, tol: float = 1e-8, max_iter: int | None = None,
                    *, away_steps: bool = False, polish: bool = True, w0=None,
                    fw_iter: int = 200, rule: str = "dantzig") -> SolveReport:
    """Minimize ``w @ K @ w`` over the polytope ``p``.

    Parameters
    ----------
    K : EnergyMatrix or (N, N) array
        Symmetric energy matrix on ``p.grid``.
    p : FeasiblePolytope
    tol : float
        Target Frank-Wolfe duality gap.
    max_iter : int, optional
        Frank-Wolfe iteration cap, default ``50 * N``.
    away_steps : bool
        Use away steps (the active set is tracked as a vertex combination).
    polish : bool
        After at most ``fw_iter`` Frank-Wolfe steps, switch to the exact
        active-set phase (PSD matrices only).
    w0 : array, optional
        Feasible warm start; ignored if it violates the constraints.

    Raises
    ------
    InfeasibleError
        If the polytope is empty.
    ValueError
        If K is not symmetric or does not match the grid.
    """
    Km, shift = _matrix_of(K)
    N = p.n
    if Km.shape != (N, N):
        raise ValueError(f"energy matrix is {Km.shape}, polytope has {N} points")
    if not np.allclose(Km, Km.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Km).max())):
        raise ValueError("energy matrix must be symmetric")
    if not np.all(np.isfinite(Km)):
        raise ValueError("energy matrix must be finite")
    if max_iter is None:
        max_iter = 50 * N
    require_feasible(p, "energy polytope")
    convex = is_positive_semidefinite(Km)

    w, basis = _initial_point(Km, p, w0)
    history = [_quad(Km, w)]
    atoms = _Atoms(w) if away_steps else None
    gap = np.inf
    it = 0
    budget = min(max_iter, fw_iter) if (polish and convex) else max_iter

    def fw_loop(w, basis, limit):
        nonlocal it, gap
        while it < limit:
            grad = 2.0 * (Km @ w)
            s, _ = lp_optimize(p, grad, "min", basis=basis, rule=rule)
            basis = s.basis or basis
            gap = float(grad @ (w - s.weights))
            if gap <= tol:
                break
            d = s.weights - w
            gamma_max = 1.0
            if atoms is not None:
                a_key, a_w, a_alpha = atoms.away(grad)
                away_gap = float(grad @ (a_w - w))
                if a_key is not None and away_gap > gap and a_alpha < 1.0:
                    d = w - a_w
                    gamma_max = a_alpha / (1.0 - a_alpha)
                else:
                    a_key = None
            gamma = _line_search(Km, w, d, grad, gamma_max)
            if gamma <= 0.0:
                break
            w = w + gamma * d
            np.maximum(w, 0.0, out=w)
            if atoms is not None:
                if a_key is None:
                    atoms.toward(s, gamma)
                else:
                    atoms.away_step(a_key, gamma, gamma_max)
            it += 1
            history.append(_quad(Km, w))
        return w, basis

    w, basis = fw_loop(w, basis, budget)
    steps = 0
    if polish and convex and gap > tol:
        w, steps = _active_set(Km, p, w, history)
        atoms = None
    grad = 2.0 * (Km @ w)
    s, _ = lp_optimize(p, grad, "min", basis=basis, rule=rule)
    gap = max(0.0, float(grad @ (w - s.weights)))
    if gap > tol and it < max_iter:
        w, basis = fw_loop(w, basis, max_iter)
        grad = 2.0 * (Km @ w)
        s, _ = lp_optimize(p, grad, "min", basis=basis, rule=rule)
        gap = max(0.0, float(grad @ (w - s.weights)))
    value = _quad(Km, w)
    mass = math.fsum(w)
    return SolveReport(
        value=value,
        weights=w,
        kkt_residual=kkt_residual(Km, p, w),
        feasibility_residual=p.residual(w),
        iterations=it,
        duality_gap=gap,
        unshifted=value - shift * mass * mass,
        local=not convex,
        converged=gap <= tol,
        polish_steps=steps,
        history=history,
        basis=list(s.basis),
    )


def _line_search(K, w, d, grad, gamma_max) -> float:
    """Exact minimizer of the quadratic along ``w + gamma d`` on [0, gamma_max]."""
    slope = float(grad @ d)
    curv = float(d @ (K @ d))
    if slope >= 0:
        return 0.0
    if curv <= 0:
        return gamma_max
    return float(min(gamma_max, -slope / (2.0 * curv)))


class _Atoms:
    """Convex combination of vertices representing the iterate (away steps)."""

    def __init__(self, w):
        self.items = {("start",): [w.copy(), 1.0]}

    def away(self, grad):
        best, key = -np.inf, None
        for k, (v, a) in self.items.items():
            val = float(grad @ v)
            if a > 0 and val > best:
                best, key = val, k
        if key is None:
            return None, None, 0.0
        v, a = self.items[key]
        return key, v, a

    def toward(self, s: Vertex, gamma):
        for item in self.items.values():
            item[1] *= (1.0 - gamma)
        key = s.support + tuple(np.round(s.weights[list(s.support)], 14))
        if key in self.items:
            self.items[key][1] += gamma
        else:
            self.items[key] = [s.weights.copy(), gamma]
        self._prune()

    def away_step(self, key, gamma, gamma_max):
        for item in self.items.values():
            item[1] *= (1.0 + gamma)
        self.items[key][1] -= gamma
        if gamma >= gamma_max * (1 - 1e-12):
            self.items[key][1] = 0.0
        self._prune()

    def _prune(self):
        self.items = {k: v for k, v in self.items.items() if v[1] > 1e-15}


# -- exact active-set phase ---------------------------------------------

def _standard_form(p: FeasiblePolytope, w):
    A, b = p._A, p._b
    x = np.zeros(A.shape[1])
    x[:p.n] = w
    if p._n_slack:
        # slacks of inequality rows: F_geq w - c_geq
        x[p.n:] = np.maximum(p.F[p._geq_rows] @ w - p.c[p._geq_rows], 0.0)
    return A, b, x


def _solve_kkt(H, A, b):
    """Minimize ``x @ H @ x`` subject to ``A x = b``; returns x and multipliers
    ``lam`` with ``2 H x = A.T @ lam``."""
    n, m = H.shape[0], A.shape[0]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = 2.0 * H
    M[:n, n:] = A.T
    M[n:, :n] = A
    rhs = np.concatenate([np.zeros(n), b])
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            sol = scipy.linalg.solve(M, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            sol = scipy.linalg.lstsq(M, rhs)[0]
    return sol[:n], -sol[n:]


def _active_set(K, p: FeasiblePolytope, w, history, max_steps=None):
    """Primal active-set method for ``min w K w`` on ``{A x = b, x >= 0}``.

    Starts from a feasible ``w`` with working set = zero coordinates. All
    bounds with negative multipliers are released together; a released bound
    that blocks at once is fixed again before any move, so every accepted
    step is a descent step.
    """
    A, b, x = _standard_form(p, w)
    ncol = A.shape[1]
    N = p.n
    H = np.zeros((ncol, ncol))
    H[:N, :N] = K
    free = x > 0
    if max_steps is None:
        max_steps = 10 * ncol + 100
    scale = max(1.0, np.abs(K).max())
    steps = 0
    for steps in range(1, max_steps + 1):
        S = np.flatnonzero(free)
        xs, _ = _solve_kkt(H[np.ix_(S, S)], A[:, S], b)
        step = xs - x[S]
        if np.abs(step).max(initial=0.0) <= 1e-13 * max(1.0, np.abs(x).max()):
            grad = 2.0 * (H @ x)
            lam = _multipliers(grad, A, S)
            mu = grad - A.T @ lam
            mu[S] = 0.0
            release = mu < -1e-11 * scale
            if not release.any():
                break
            free |= release
            continue
        neg = step < 0
        alpha = 1.0
        block = None
        if neg.any():
            ratios = x[S][neg] / -step[neg]
            k = int(np.argmin(ratios))
            if ratios[k] < 1.0:
                alpha = float(ratios[k])
                block = S[np.flatnonzero(neg)[k]]
        x_new = x.copy()
        x_new[S] = x[S] + alpha * step
        if block is not None:
            x_new[block] = 0.0
            free[block] = False
        hit = S[(x_new[S] <= 0.0) & neg]
        free[hit] = False
        x_new = np.maximum(x_new, 0.0)
        if alpha == 0.0:
            continue
        e_new = _quad(K, x_new[:N])
        if e_new > history[-1] + 1e-13 * max(1.0, abs(history[-1])):
            # Numerical trouble: never accept an ascent step.
            break
        x = x_new
        history.append(e_new)
    return x[:N], steps


def _multipliers(grad, A, S):
    lam, *_ = np.linalg.lstsq(A[:, S].T, grad[S], rcond=None)
    return lam


def kkt_residual(K, p: FeasiblePolytope, w) -> float:
    """Max violation of stationarity on the support and dual feasibility off it."""
    A, _, x = _standard_form(p, w)
    N = p.n
    grad = np.zeros(A.shape[1])
    grad[:N] = 2.0 * (K @ w)
    S = np.flatnonzero(x > 0)
    if S.size == 0:
        return float("nan")
    lam = _multipliers(grad, A, S)
    mu = grad - A.T @ lam
    stat = np.abs(mu[S]).max(initial=0.0)
    off = np.ones(len(x), dtype=bool)
    off[S] = False
    dual = max(0.0, -mu[off].min(initial=0.0))
    return float(max(stat, dual))


def energy_polytope_min(K, p: FeasiblePolytope, **kw) -> float:
    return minimize_energy(K, p, **kw).value


# -- general problems ---------------------------------------------------

@dataclass
class ReducedProblem:
    """Kernel ``k_c`` for the mass-``c`` reduction of
    ``J(nu) = 1/2 nu f nu + h . nu`` over measures ``nu = c mu``.

    For a probability vector ``mu``:
    ``J(c mu) = c**2 * (mu @ Kc @ mu) + offset`` with
    ``Kc = 1/2 (f + (h_i + h_j) / c) + K_shift`` and ``offset = -c**2 K_shift``.
    """

    kernel_c: Kernel
    K_c: float
    c: float
    offset: float
    matrix: np.ndarray = field(repr=False)

    def recover(self, reduced_value: float) -> float:
        return self.c ** 2 * reduced_value + self.offset


def reduce_general(f, h, c: float, grid=None, margin: float = 1e-9) -> ReducedProblem:
    """Build the reduced kernel for a fixed total mass ``c``.

    Parameters
    ----------
    f : EnergyMatrix, Kernel or (N, N) array
        Symmetric interaction on the grid.
    h : callable or (N,) array
        Linear term on the grid.
    c : float
        Total mass, positive.
    grid : array, optional
        Needed when ``f`` is a Kernel or ``h`` is callable.
    """
    if not c > 0:
        raise ValueError("mass c must be positive")
    if isinstance(f, EnergyMatrix):
        F, grid = f.entries, f.grid if grid is None else grid
    elif isinstance(f, Kernel):
        if grid is None:
            raise ValueError("a grid is required to tabulate a kernel")
        from .kernel import assemble_energy_matrix
        F = assemble_energy_matrix(f, grid).entries
    else:
        F = np.asarray(f, dtype=float)
    if grid is None:
        grid = np.arange(F.shape[0], dtype=float)
    g = as_grid(grid)
    if F.shape != (g.shape[0], g.shape[0]) or not np.array_equal(F, F.T):
        raise ValueError("f must be a symmetric matrix on the grid")
    if callable(h):
        from .measure import apply_pointwise
        hv = apply_pointwise(h, g)
    else:
        hv = np.asarray(h, dtype=float).reshape(-1)
    if hv.shape != (g.shape[0],) or not np.all(np.isfinite(hv)):
        raise ValueError("h must be finite on the grid")
    bracket = 0.5 * (F + (hv[:, None] + hv[None, :]) / c)
    K_c = max(0.0, -float(bracket.min())) + margin
    M = bracket + K_c
    M = 0.5 * (M + M.T)
    kern = Kernel.tabulated(M, g)
    return ReducedProblem(kern, K_c, float(c), -c * c * K_c, M)


def general_objective(f_matrix, h_vec, nu) -> float:
    """``1/2 nu f nu + h . nu`` evaluated directly."""
    nu = np.asarray(nu, dtype=float)
    return 0.5 * math.fsum(nu * (f_matrix @ nu)) + math.fsum(h_vec * nu)


@dataclass
class MassSweep:
    c: float
    report: SolveReport
    objective: float
    evaluations: list = field(default_factory=list, repr=False)
    certificates: dict = field(default_factory=dict, repr=False)


def _scaled_polytope(grid, F_rows, g_targets, c, sense):
    """Constraints ``int c Phi dmu >= g`` (or ``=``) for probability ``mu``."""
    N = as_grid(grid).shape[0]
    if F_rows is None or len(F_rows) == 0:
        return FeasiblePolytope.simplex(grid)
    rows = np.vstack([np.ones(N), c * np.atleast_2d(F_rows)])
    targets = np.concatenate([[1.0], np.atleast_1d(g_targets)])
    return FeasiblePolytope.from_matrix(grid, rows, targets, sense)


def sweep_mass(f, h, family_rows, g_targets, c_range, steps: int = 21, *, grid=None,
               sense=GEQ, golden_iters: int = 10, tol: float = 1e-10,
               **solve_kw) -> MassSweep:
    """Minimize the general objective over the total mass ``c``.

    Parameters
    ----------
    f, h :
        As in ``reduce_general``.
    family_rows : (n, N) array or None
        Constraint functions on the grid (``None`` for mass-only problems).
    g_targets : (n,) array
        Right-hand sides; constraints read ``int c f_i dmu >= g_i``.
    c_range : (c1, c2)
    steps : int
        Uniform grid size before golden-section refinement.

    Raises
    ------
    InfeasibleError
        If no mass in the grid admits a feasible measure; carries the
        per-c certificates.
    """
    c1, c2 = map(float, c_range)
    if not (0 < c1 <= c2):
        raise ValueError("need 0 < c1 <= c2")
    F = f.entries if isinstance(f, EnergyMatrix) else f
    if grid is None and isinstance(f, EnergyMatrix):
        grid = f.grid
    evals: list = []
    certs: dict = {}
    cache: dict = {}

    def solve_at(c):
        if c in cache:
            return cache[c]
        red = reduce_general(F, h, c, grid=grid)
        p = _scaled_polytope(red.kernel_c.table_grid, family_rows, g_targets, c, sense)
        res = check_feasible(p)
        if not res:
            certs[c] = res.certificate
            cache[c] = (np.inf, None)
            evals.append((c, np.inf))
            return cache[c]
        rep = minimize_energy(red.matrix, p, tol=tol, **solve_kw)
        obj = red.recover(rep.value)
        cache[c] = (obj, rep)
        evals.append((c, obj))
        return cache[c]

    if c1 == c2 or steps <= 1:
        cs = np.array([c1])
    else:
        cs = np.linspace(c1, c2, steps)
    vals = [solve_at(float(c))[0] for c in cs]
    if not np.isfinite(min(vals)):
        raise InfeasibleError("every mass in the sweep is infeasible", certs)
    k = int(np.argmin(vals))
    if len(cs) > 1:
        lo = float(cs[max(k - 1, 0)])
        hi = float(cs[min(k + 1, len(cs) - 1)])
        invphi = (math.sqrt(5) - 1) / 2
        a, b = lo, hi
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1, f2 = solve_at(x1)[0], solve_at(x2)[0]
        for _ in range(golden_iters):
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = solve_at(x1)[0]
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = solve_at(x2)[0]
    best_c = min(cache, key=lambda c: (cache[c][0], c))
    obj, rep = cache[best_c]
    return MassSweep(best_c, rep, obj, sorted(evals), certs)
