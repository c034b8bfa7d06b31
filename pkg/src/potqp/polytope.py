"""Moment polytopes: probability weights on a grid under linear moment
constraints, with LP optimization and vertex enumeration.

A vertex of ``{w >= 0, F w = c}`` is a measure with at most as many atoms
as there are independent constraint rows, and its atoms' constraint
columns are linearly independent.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .family import FunctionFamily, evaluate_on_grid
from .kernel import as_grid

EQ, GEQ = "eq", "geq"


class InfeasibleError(ValueError):
    """Raised when an operation needs a feasible polytope."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass
class Certificate:
    """Farkas vector over the constraint rows: ``y @ F <= 0`` on grid
    columns (``y >= 0`` on inequality rows) while ``y @ c > 0``."""

    y: np.ndarray
    gap: float
    residual: float


@dataclass
class FeasibilityResult:
    feasible: bool
    vertex: "Vertex | None" = None
    certificate: Certificate | None = None

    def __bool__(self):
        return self.feasible


@dataclass
class Vertex:
    weights: np.ndarray
    support: tuple
    basis: list = field(default_factory=list)
    slacks: np.ndarray | None = None
    duals: np.ndarray | None = None

    @property
    def n_atoms(self) -> int:
        return len(self.support)


@dataclass
class FeasiblePolytope:
    """Discrete set ``{w >= 0 : F w (= or >=) c}`` on a grid.

    Row 0 is the probability constraint ``sum(w) = 1``. Equality rows that
    are linear combinations of earlier ones (at ``rank_tol``) are kept in
    ``F`` but left out of the LP data; ``redundant`` flags every row whose
    removal leaves the row space unchanged.
    """

    grid: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    c: np.ndarray
    sense: list
    rank_tol: float = 1e-10
    redundant: np.ndarray = field(init=False, repr=False)
    over_constrained: bool = field(init=False)

    def __post_init__(self):
        self.grid = as_grid(self.grid)
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        rows, N = self.F.shape
        if N != self.grid.shape[0]:
            raise ValueError("constraint matrix columns must match the grid")
        if len(self.c) != rows:
            raise ValueError(f"{rows} constraint rows but {len(self.c)} targets")
        if not (np.all(np.isfinite(self.F)) and np.all(np.isfinite(self.c))):
            raise ValueError("constraint data must be finite")
        if isinstance(self.sense, str):
            self.sense = [EQ] + [self.sense] * (rows - 1)
        self.sense = [s.lower() for s in self.sense]
        if len(self.sense) != rows or any(s not in (EQ, GEQ) for s in self.sense):
            raise ValueError("sense must be 'eq' or 'geq' per row")
        if not (np.all(self.F[0] == 1.0) and self.c[0] == 1.0 and self.sense[0] == EQ):
            raise ValueError("row 0 must be the probability constraint sum(w) = 1")
        self.over_constrained = rows > N
        self.redundant = _redundant_rows(self.F, self.rank_tol)
        self._prepare_lp()
        self._feasibility = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_matrix(cls, grid, F, c, sense=EQ, rank_tol=1e-10):
        return cls(grid, F, c, sense, rank_tol)

    @classmethod
    def simplex(cls, grid):
        g = as_grid(grid)
        return cls(g, np.ones((1, g.shape[0])), [1.0], EQ)

    # -- derived data -------------------------------------------------------
    @property
    def n(self) -> int:
        return self.grid.shape[0]

    @property
    def n_rows(self) -> int:
        return self.F.shape[0]

    @property
    def is_simplex(self) -> bool:
        return self._A.shape[0] == 1 and self._n_slack == 0

    def _prepare_lp(self):
        eq = [i for i, s in enumerate(self.sense) if s == EQ]
        geq = [i for i, s in enumerate(self.sense) if s == GEQ]
        T, conflicts, trunc = _reduce_equalities(self.F[eq], self.c[eq], self.rank_tol)
        self._eq_idx = eq
        self._geq_rows = geq
        self._T = T
        N = self.n
        g = len(geq)
        r = T.shape[0]
        A = np.zeros((r + g, N + g))
        A[:r, :N] = T @ self.F[eq]
        A[0, :N] = 1.0
        A[r:, :N] = self.F[geq]
        A[r:, N:] = -np.eye(g)
        self._A = A
        self._b = np.concatenate([T @ self.c[eq], self.c[geq]])
        self._b[0] = 1.0
        self._n_slack = g
        self.truncation_residual = trunc
        self._inconsistent = []
        for y_eq in conflicts:
            y = np.zeros(self.n_rows)
            y[eq] = y_eq
            self._inconsistent.append(y)

    def _rows_from_std(self, y_std) -> np.ndarray:
        """Map a vector on the LP rows back to the original constraint rows."""
        r = self._T.shape[0]
        y = np.zeros(self.n_rows)
        y[self._eq_idx] = self._T.T @ y_std[:r]
        y[self._geq_rows] = y_std[r:]
        return y

    def residual(self, w) -> float:
        """Largest violation of any constraint row by weights ``w``."""
        w = np.asarray(w, dtype=float)
        r = self.F @ w - self.c
        viol = np.where(np.array(self.sense) == EQ, np.abs(r), np.maximum(-r, 0.0))
        return float(max(viol.max(), max(0.0, -w.min())))

    def row_scale(self) -> float:
        return float(max(1.0, np.abs(self.F).max(), np.abs(self.c).max()))

    def _certificate_from_std(self, y_std) -> Certificate:
        return _certificate(self, self._rows_from_std(y_std))


def _redundant_rows(F, rank_tol):
    rows = F.shape[0]
    if rows == 1:
        return np.zeros(1, dtype=bool)
    U, s, _ = np.linalg.svd(F, full_matrices=True)
    r = int(np.sum(s > rank_tol * s[0])) if s.size else 0
    if r == rows:
        return np.zeros(rows, dtype=bool)
    left_null = U[:, r:]
    return np.linalg.norm(left_null, axis=1) > 1e-8


def _reduce_equalities(F_eq, c_eq, rank_tol):
    """Well-conditioned equivalent of the equality block ``F_eq w = c_eq``.

    Row 0 (the mass row) is kept exactly. The other rows are centred against
    it and replaced by the orthonormal right singular vectors whose singular
    values exceed ``rank_tol`` times the block's largest one, so the LP never
    sees numerically dependent rows. Returns the row transform ``T`` (LP rows
    are ``T @ F_eq``), Farkas vectors for discarded directions whose targets
    no probability vector can reach, and the largest target mismatch along
    the discarded directions.
    """
    e, N = F_eq.shape
    T0 = np.zeros((1, e))
    T0[0, 0] = 1.0
    if e == 1:
        return T0, [], 0.0
    Fo = F_eq[1:]
    m = Fo.mean(axis=1)
    R = Fo - m[:, None]
    t = c_eq[1:] - m
    U, s, Vt = np.linalg.svd(R, full_matrices=True)
    ref = max(np.sqrt(N), s[0] if s.size else 0.0)
    r = int(np.sum(s > rank_tol * ref))
    # LP rows V_r^T = diag(1/s_r) U_r^T [-m, I] F_eq.
    M = np.hstack([-m[:, None], np.eye(e - 1)])
    T = np.vstack([T0, (U[:, :r].T / s[:r, None]) @ M])
    conflicts, worst = [], 0.0
    scale = max(1.0, np.abs(c_eq).max(), np.abs(F_eq).max())
    for k in range(r, e - 1):
        u = U[:, k]
        proj = u @ R
        tk = float(u @ t)
        lo, hi = float(proj.min()), float(proj.max())
        worst = max(worst, abs(tk))
        tol = 1e-12 * scale
        if tk > hi + tol or tk < lo - tol:
            sgn = 1.0 if tk > hi else -1.0
            y = np.zeros(e)
            y[1:] = sgn * u
            # Shift by the mass row so that y @ F_eq <= 0 column-wise.
            y[0] = -sgn * (u @ m) - (hi if sgn > 0 else -lo)
            conflicts.append(y)
    return T, conflicts, worst


def _certificate(p: FeasiblePolytope, y) -> Certificate:
    yF = y @ p.F
    geq = np.array(p.sense) == GEQ
    resid = max(0.0, float(yF.max(initial=0.0)), float((-y[geq]).max(initial=0.0)))
    return Certificate(y, float(y @ p.c), resid)


def _vertex_from_x(p: FeasiblePolytope, x, basis, duals=None) -> Vertex:
    N = p.n
    w = np.array(x[:N])
    w[w < 1e-14] = 0.0
    slacks = np.array(x[N:]) if p._n_slack else None
    support = tuple(int(j) for j in np.flatnonzero(w > 0))
    return Vertex(w, support, list(basis), slacks, duals)


def check_feasible(p: FeasiblePolytope) -> FeasibilityResult:
    """Phase-1 simplex: a feasible vertex or a Farkas certificate.

    The result is cached on the polytope.
    """
    if p._feasibility is not None:
        return p._feasibility
    if p._inconsistent:
        y = p._inconsistent[0]
        res = FeasibilityResult(False, certificate=_certificate(p, y))
    else:
        lp = simplex.solve_lp(np.zeros(p._A.shape[1]), p._A, p._b)
        if lp.status == simplex.INFEASIBLE:
            res = FeasibilityResult(False, certificate=p._certificate_from_std(lp.certificate))
        else:
            res = FeasibilityResult(True, vertex=_vertex_from_x(p, lp.x, lp.basis))
    p._feasibility = res
    return res


def require_feasible(p: FeasiblePolytope, what="polytope") -> Vertex:
    res = check_feasible(p)
    if not res:
        raise InfeasibleError(f"{what} is infeasible (certificate gap "
                              f"{res.certificate.gap:.3g})", res.certificate)
    return res.vertex


def lp_optimize(p: FeasiblePolytope, objective, direction: str = "min", *,
                basis=None, rule: str = "bland") -> tuple[Vertex, float]:
    """Optimize a linear functional of the grid weights over the polytope.

    Returns an optimal vertex (basic feasible solution) and the value.
    ``basis`` warm-starts the simplex from a previous vertex's basis.
    """
    obj = np.asarray(objective, dtype=float)
    if obj.shape != (p.n,):
        raise ValueError(f"objective must have length {p.n}")
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    sgn = 1.0 if direction == "min" else -1.0
    if p.is_simplex:
        j = int(np.argmin(sgn * obj))
        w = np.zeros(p.n)
        w[j] = 1.0
        return Vertex(w, (j,), [j], None, np.array([obj[j]])), float(obj[j])
    if p._inconsistent:
        require_feasible(p)
    cost = np.concatenate([sgn * obj, np.zeros(p._n_slack)])
    lp = simplex.solve_lp(cost, p._A, p._b, basis=basis, rule=rule)
    if lp.status == simplex.INFEASIBLE:
        raise InfeasibleError("polytope is infeasible",
                              p._certificate_from_std(lp.certificate))
    if lp.status != simplex.OPTIMAL:
        raise RuntimeError(f"internal LP failure on a bounded polytope: {lp.status}")
    duals = sgn * p._rows_from_std(lp.duals)
    v = _vertex_from_x(p, lp.x, lp.basis, duals)
    return v, float(obj @ v.weights)


@dataclass
class VertexEnumeration:
    vertices: list
    complete: bool
    bases_checked: int

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]


def enumerate_vertices(p: FeasiblePolytope, cap: int = 10000,
                       chunk: int = 4096) -> VertexEnumeration:
    """All basic feasible solutions, deduplicated by support.

    Meant for small instances (N up to ~25, a handful of rows). Stops early
    with ``complete=False`` once more than ``cap`` vertices are found.
    """
    if p._inconsistent:
        return VertexEnumeration([], True, 0)
    A, b = p._A, p._b
    m, ncol = A.shape
    scale = max(1.0, np.abs(b).max())
    found: dict = {}
    checked = 0
    combos = itertools.combinations(range(ncol), m)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block)
        B = A[:, idx].transpose(1, 0, 2)
        checked += len(block)
        s = np.linalg.svd(B, compute_uv=False)
        ok = s[:, -1] > p.rank_tol * np.maximum(s[:, 0], 1e-300)
        if not ok.any():
            continue
        xb = np.linalg.solve(B[ok], np.broadcast_to(b, (int(ok.sum()), m))[..., None])[..., 0]
        feas = xb.min(axis=1) >= -1e-10 * scale
        for cols, vals in zip(idx[ok][feas], xb[feas]):
            x = np.zeros(ncol)
            x[cols] = np.maximum(vals, 0.0)
            if np.abs(A @ x - b).max() > 1e-9 * scale:
                continue
            v = _vertex_from_x(p, x, list(cols))
            key = tuple(np.flatnonzero(x > 1e-14))
            dup = found.get(key)
            if dup is None:
                found[key] = v
                if len(found) > cap:
                    return VertexEnumeration(list(found.values()), False, checked)
    verts = sorted(found.values(), key=lambda v: (v.support, tuple(v.weights)))
    return VertexEnumeration(verts, True, checked)


def columns_independent(p: FeasiblePolytope, support, tol=None) -> bool:
    """Whether the constraint columns at ``support`` are linearly independent."""
    tol = p.rank_tol if tol is None else tol
    if len(support) == 0:
        return True
    M = p.F[:, list(support)]
    s = np.linalg.svd(M, compute_uv=False)
    return len(support) <= M.shape[0] and s[-1] > tol * s[0]


def feasibility_margin(p: FeasiblePolytope) -> tuple[float, np.ndarray | None]:
    """Signed distance of the targets from the boundary of the moment hull.

    Outside: minus the L1 distance of ``c`` to ``{F w : w feasible}``.
    Inside: the step along the ray from the hull centroid to ``c`` that stays
    in the hull, measured in Euclidean length. Equality polytopes only.
    """
    if any(s == GEQ for s in p.sense):
        raise ValueError("margin is defined for equality polytopes only")
    F, c = p.F, p.c
    N = p.n
    k = F.shape[0] - 1
    # L1 distance: F_rest w + r+ - r- = c_rest, sum w = 1.
    A = np.zeros((k + 1, N + 2 * k))
    A[0, :N] = 1.0
    A[1:, :N] = F[1:]
    A[1:, N:N + k] = np.eye(k)
    A[1:, N + k:] = -np.eye(k)
    cost = np.concatenate([np.zeros(N), np.ones(2 * k)])
    lp = simplex.solve_lp(cost, A, c, rule="dantzig")
    dist = lp.value
    if dist > 1e-12 * p.row_scale():
        return -float(dist), None
    w_in = lp.x[:N]
    centroid = F[1:].mean(axis=1)
    d = c[1:] - centroid
    nd = np.linalg.norm(d)
    if nd < 1e-14:
        d = np.zeros(k)
        d[0] = 1.0
        nd = 1.0
    # max t: F_rest w - t d = c_rest, sum w = 1.
    A2 = np.zeros((k + 1, N + 1))
    A2[0, :N] = 1.0
    A2[1:, :N] = F[1:]
    A2[1:, N] = -d
    cost2 = np.zeros(N + 1)
    cost2[N] = -1.0
    lp2 = simplex.solve_lp(cost2, A2, c, rule="dantzig")
    if lp2.status != simplex.OPTIMAL:
        return 0.0, w_in
    return float(lp2.x[N] * nd), lp2.x[:N]


def build(grid, family: FunctionFamily | None, c, sense=EQ, rank_tol=1e-10) -> FeasiblePolytope:
    """Assemble the moment polytope of ``family`` on ``grid``.

    The ones row is prepended unless the family already starts with f_0 = 1.
    ``c`` may omit the leading 1 of the probability row.
    """
    g = as_grid(grid)
    if family is None or len(family) == 0:
        rows = np.ones((1, g.shape[0]))
    else:
        rows = evaluate_on_grid(family, g)
        if not family.normalized:
            rows = np.vstack([np.ones(g.shape[0]), rows])
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if len(c) == rows.shape[0] - 1:
        c = np.concatenate([[1.0], c])
    if isinstance(sense, (list, tuple)) and len(sense) == rows.shape[0] - 1:
        sense = [EQ] + list(sense)
    return FeasiblePolytope(g, rows, c, sense, rank_tol)


def restrict(p: FeasiblePolytope, support) -> FeasiblePolytope:
    """The face of ``p`` whose weights vanish off ``support`` (grid indices)."""
    S = np.asarray(sorted(set(int(j) for j in support)), dtype=int)
    return FeasiblePolytope(p.grid[S], p.F[:, S], p.c, list(p.sense), p.rank_tol)
