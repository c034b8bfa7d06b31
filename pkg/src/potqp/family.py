"""Constraint function families and moment-feasibility tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernel import as_grid
from .measure import apply_pointwise

KINDS = ("monomial", "power", "exp", "cosh", "sections", "table")


@dataclass(frozen=True)
class FunctionFamily:
    """Ordered functions f_0, ..., f_n on X.

    ``members`` are vectorized callables (see ``measure.apply_pointwise``).
    ``normalized`` is True when f_0 is the constant 1, in which case the
    family's first row doubles as the probability constraint.

    The ``exp`` kind uses decaying exponentials ``exp(-lambda_i x)``, the form
    whose moments are Laplace transforms.
    """

    kind: str
    members: tuple = field(repr=False)
    params: dict = field(default_factory=dict)
    normalized: bool = False
    table_grid: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.members)

    # -- constructors ---------------------------------------------------
    @classmethod
    def monomial(cls, n: int) -> "FunctionFamily":
        members = tuple(_power(i) for i in range(n + 1))
        return cls("monomial", members, {"n": n}, normalized=True)

    @classmethod
    def power(cls, lambdas: Sequence[float]) -> "FunctionFamily":
        lam = _increasing(lambdas, "exponents")
        return cls("power", tuple(_power(v) for v in lam), {"lambdas": lam},
                   normalized=lam[0] == 0)

    @classmethod
    def exponential(cls, lambdas: Sequence[float]) -> "FunctionFamily":
        lam = _increasing(lambdas, "rates")
        return cls("exp", tuple(_exp(v) for v in lam), {"lambdas": lam},
                   normalized=lam[0] == 0)

    @classmethod
    def cosh(cls, lambdas: Sequence[float]) -> "FunctionFamily":
        lam = _increasing(lambdas, "rates")
        return cls("cosh", tuple(_cosh(v) for v in lam), {"lambdas": lam},
                   normalized=lam[0] == 0)

    @classmethod
    def sections(cls, Phi: Callable, z_points) -> "FunctionFamily":
        """f_i(x) = Phi(x, z_i)."""
        zs = [np.asarray(z, dtype=float) if np.ndim(z) else float(z) for z in z_points]
        members = tuple(_section(Phi, z) for z in zs)
        return cls("sections", members, {"Phi": Phi, "z_points": zs})

    @classmethod
    def tabulated(cls, matrix, grid) -> "FunctionFamily":
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        g = as_grid(grid)
        if M.shape[1] != g.shape[0]:
            raise ValueError("table columns must match the grid")
        normalized = bool(np.all(M[0] == 1.0))
        members = tuple(_row(M[i], g) for i in range(M.shape[0]))
        return cls("table", members, {"matrix": M}, normalized=normalized, table_grid=g)

    @classmethod
    def from_functions(cls, funcs, normalized=False) -> "FunctionFamily":
        return cls("sections", tuple(funcs), {}, normalized=normalized)


def _increasing(vals, what):
    lam = [float(v) for v in vals]
    if len(lam) == 0 or any(b <= a for a, b in zip(lam, lam[1:])):
        raise ValueError(f"{what} must be strictly increasing")
    return lam


def _power(p):
    def f(x):
        return np.ones_like(x, dtype=float) if p == 0 else np.power(x, p)
    f.__name__ = f"x^{p}"
    return f


def _exp(lam):
    def f(x):
        return np.exp(-lam * np.asarray(x, dtype=float))
    f.__name__ = f"exp(-{lam}x)"
    return f


def _cosh(lam):
    def f(x):
        return np.cosh(lam * np.asarray(x, dtype=float))
    f.__name__ = f"cosh({lam}x)"
    return f


def _section(Phi, z):
    def f(x):
        return Phi(x, z)
    f.__name__ = f"Phi(.,{z})"
    return f


def _row(values, grid):
    def f(x):
        X = as_grid(x)
        out = np.empty(X.shape[0])
        for i, p in enumerate(X):
            hit = np.flatnonzero(np.all(grid == p, axis=1))
            if hit.size == 0:
                raise ValueError(f"point {p} is not on the tabulated family's grid")
            out[i] = values[hit[0]]
        return out
    return f


def evaluate_on_grid(family: FunctionFamily, grid) -> np.ndarray:
    """Matrix ``F[i, j] = f_i(x_j)``."""
    g = as_grid(grid)
    if g.shape[0] == 0:
        raise ValueError("grid is empty")
    F = np.empty((len(family), g.shape[0]))
    for i, f in enumerate(family.members):
        with np.errstate(all="ignore"):
            row = apply_pointwise(f, g)
        bad = np.flatnonzero(~np.isfinite(row))
        if bad.size:
            name = getattr(f, "__name__", f"member {i}")
            raise ArithmeticError(f"family member {i} ({name}) is not finite at "
                                  f"point {g[bad[0]]}")
        F[i] = row
    return F


@dataclass
class ChebyshevCheck:
    passed: bool
    witness: np.ndarray | None
    trials: int
    min_relative_det: float

    def __bool__(self):
        return self.passed


def chebyshev_system_check(family: FunctionFamily, domain, trials: int = 200,
                           seed: int = 0, rel_tol: float = 1e-10) -> ChebyshevCheck:
    """Sample sorted tuples of distinct points and test the generalized
    Vandermonde determinants ``det[f_i(x_j)]`` for vanishing.

    Determinants are compared with the Hadamard bound (product of column
    norms). A pass means "no violation found in ``trials`` draws"; a failure
    returns the offending tuple as witness.
    """
    a, b = map(float, domain)
    if not b > a:
        raise ValueError("domain must have positive length")
    n1 = len(family)
    if n1 < 2:
        raise ValueError("need at least two functions")
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        x = np.sort(rng.uniform(a, b, n1))
        if np.any(np.diff(x) == 0):
            continue
        M = evaluate_on_grid(family, x)
        scale = np.prod(np.linalg.norm(M, axis=0))
        rel = abs(np.linalg.det(M)) / scale if scale > 0 else 0.0
        worst = min(worst, rel)
        if rel <= rel_tol:
            return ChebyshevCheck(False, x, trials, rel)
    return ChebyshevCheck(True, None, trials, worst)


@dataclass
class MomentFeasibility:
    feasible: bool
    violation: tuple[int, int] | None = None
    margin: float = np.nan
    point: np.ndarray | None = None

    def __bool__(self):
        return self.feasible


def forward_differences(c) -> list[np.ndarray]:
    """``[c, Δc, Δ²c, ...]`` with ``Δc_k = c_{k+1} - c_k``."""
    out = [np.asarray(c, dtype=float)]
    while len(out[-1]) > 1:
        out.append(np.diff(out[-1]))
    return out


def monomial_moment_feasible(c, N: int | None = None, tol: float = 1e-12) -> MomentFeasibility:
    """Hausdorff moment test on [0, 1]: ``(-1)^r Δ^r c_k >= 0`` for r + k <= N.

    Returns the first violation in lexicographic (r, k) order.
    """
    c = np.asarray(c, dtype=float)
    if N is None:
        N = len(c) - 1
    if len(c) != N + 1:
        raise ValueError(f"expected {N + 1} moments, got {len(c)}")
    if abs(c[0] - 1.0) > 1e-12:
        raise ValueError("c_0 must be 1 for a probability measure")
    worst = np.inf
    for r, d in enumerate(forward_differences(c)):
        signed = (-1) ** r * d
        for k, v in enumerate(signed):
            worst = min(worst, v)
            if v < -tol:
                return MomentFeasibility(False, (r, k), float(v))
    return MomentFeasibility(True, None, float(worst))


def exp_curve_points(lambdas, grid_u: int) -> tuple[np.ndarray, np.ndarray]:
    """Samples of Γ(u) = (u, u^(λ2/λ1), ..., u^(λN/λ1)) on [exp(-λ1), 1].

    Returns ``(u, G)`` with ``G`` of shape (N, grid_u).
    """
    lam = np.asarray(lambdas, dtype=float)
    u = np.linspace(np.exp(-lam[1]), 1.0, grid_u)
    G = np.vstack([u ** (lj / lam[1]) for lj in lam[1:]])
    return u, G


def exp_curve_feasible(c, lambdas, grid_u: int = 1000) -> MomentFeasibility:
    """Decide whether ``c_j = int exp(-λ_j x) dmu`` is attainable by a
    probability measure on [0, 1], via convex-hull membership of
    (c_1, ..., c_N) in the sampled curve Γ.

    The margin is the hull depth along the ray from the sample centroid
    (positive inside, zero on the boundary) or minus the L1 distance to the
    hull (outside). ``|margin| < 1e-9`` is resolution limited.
    """
    from .polytope import FeasiblePolytope, feasibility_margin

    c = np.asarray(c, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if len(c) != len(lam) or len(c) < 2:
        raise ValueError("c and lambdas must have equal length >= 2")
    if lam[0] != 0 or np.any(np.diff(lam) <= 0):
        raise ValueError("need 0 = lambda_0 < lambda_1 < ... < lambda_N")
    if abs(c[0] - 1.0) > 1e-12 or np.any(np.diff(c) > 0) or c[-1] <= 0:
        raise ValueError("need 1 = c_0 >= c_1 >= ... >= c_N > 0")
    u, G = exp_curve_points(lam, grid_u)
    F = np.vstack([np.ones(grid_u), G])
    p = FeasiblePolytope.from_matrix(u, F, c)
    margin, weights = feasibility_margin(p)
    return MomentFeasibility(margin >= -1e-9, None, margin, weights)
