"""Kernels k(x, y), energy-matrix assembly and Carleson admissibility."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

RADIAL_KINDS = ("log", "riesz", "newton", "carleson")
KINDS = RADIAL_KINDS + ("table",)


def as_grid(points) -> np.ndarray:
    """Return points as a float array of shape ``(N, d)``."""
    g = np.asarray(points, dtype=float)
    if g.ndim == 0:
        g = g.reshape(1, 1)
    elif g.ndim == 1:
        g = g[:, None]
    if g.ndim != 2:
        raise ValueError(f"grid must be 1-D or 2-D, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("grid has non-finite coordinates")
    return g


def as_point(x) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"point must be a coordinate vector, got shape {p.shape}")
    return p


def distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix. Coordinates are accumulated in a fixed
    order so single-pair and full-matrix calls agree bit for bit."""
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    d2 = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        diff = X[:, k][:, None] - Y[:, k][None, :]
        d2 += diff * diff
    return np.sqrt(d2)


def fundamental_solution(r, d: int):
    """Fundamental solution of the Laplacian up to normalization:
    ``log(1/r)`` for d = 2 and ``r**(2-d)`` for d > 2."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        if d == 2:
            return -np.log(r)
        return np.power(r, 2.0 - d)


def min_spacing(grid) -> float:
    g = as_grid(grid)
    if g.shape[0] < 2:
        return math.inf
    dist, _ = cKDTree(g).query(g, k=2)
    return float(dist[:, 1].min())


@dataclass(frozen=True)
class Kernel:
    """A symmetric kernel ``k(x, y)``.

    ``kind`` is one of ``log``, ``riesz`` (parameter ``s``), ``newton``
    (dimension ``dim``), ``carleson`` (profile ``H`` composed with the
    fundamental solution in dimension ``dim``) or ``table`` (a matrix on a
    fixed grid).

    The diagonal policy is ``"infinite"`` (the extended value) or
    ``"regularized"``: the self-interaction of a singular kernel is replaced
    by ``k(epsilon)``. ``epsilon=None`` under the regularized policy means
    half the minimal grid spacing, resolved at assembly time.

    ``shift`` is a constant added to every value, used to make kernels that
    are negative on the working box nonnegative.
    """

    kind: str
    s: float | None = None
    dim: int | None = None
    H: Callable | None = field(default=None, compare=False)
    table: np.ndarray | None = field(default=None, compare=False, repr=False)
    table_grid: np.ndarray | None = field(default=None, compare=False, repr=False)
    diagonal: str = "regularized"
    epsilon: float | None = None
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.diagonal not in ("infinite", "regularized"):
            raise ValueError(f"unknown diagonal policy {self.diagonal!r}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.kind == "riesz" and not (self.s is not None and self.s > 0):
            raise ValueError("Riesz kernel requires s > 0")
        if self.kind in ("newton", "carleson") and not (self.dim and self.dim >= 2):
            raise ValueError(f"{self.kind} kernel requires dimension >= 2")
        if self.kind == "carleson":
            if self.H is None:
                raise ValueError("Carleson kernel requires a profile H")
            _check_profile(self.H)
        if self.kind == "table":
            if self.table is None or self.table_grid is None:
                raise ValueError("tabulated kernel requires table and grid")
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] != len(self.table_grid):
                raise ValueError("table must be square and match its grid")
            if not np.array_equal(t, t.T):
                raise ValueError("tabulated kernel must be symmetric")
            if not np.all(np.isfinite(t)):
                raise ValueError("tabulated kernel must be finite")

    # -- constructors --------------------------------------------------
    @classmethod
    def logarithmic(cls, epsilon=None, diagonal="regularized", shift=0.0):
        return cls("log", diagonal=diagonal, epsilon=epsilon, shift=shift)

    @classmethod
    def riesz(cls, s, epsilon=None, diagonal="regularized", shift=0.0):
        return cls("riesz", s=float(s), diagonal=diagonal, epsilon=epsilon, shift=shift)

    @classmethod
    def newtonian(cls, dim, epsilon=None, diagonal="regularized", shift=0.0):
        return cls("newton", dim=int(dim), diagonal=diagonal, epsilon=epsilon, shift=shift)

    @classmethod
    def carleson(cls, H, dim, epsilon=None, diagonal="regularized", shift=0.0):
        return cls("carleson", H=H, dim=int(dim), diagonal=diagonal, epsilon=epsilon,
                   shift=shift)

    @classmethod
    def tabulated(cls, matrix, grid, shift=0.0):
        return cls("table", table=np.array(matrix, dtype=float), table_grid=as_grid(grid),
                   shift=shift)

    # -- properties ----------------------------------------------------
    @property
    def is_radial(self) -> bool:
        return self.kind in RADIAL_KINDS

    @property
    def singular(self) -> bool:
        """True if the kernel is infinite on the diagonal."""
        if not self.is_radial:
            return False
        return not np.isfinite(self.radial(np.array([0.0]))[0])

    def radial(self, r) -> np.ndarray:
        """Unshifted radial profile k(r)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            if self.kind == "log":
                return -np.log(r)
            if self.kind == "riesz":
                return np.power(r, -self.s)
            if self.kind == "newton":
                return fundamental_solution(r, self.dim)
            if self.kind == "carleson":
                lam = fundamental_solution(r, self.dim)
                return np.asarray(self.H(lam), dtype=float)
        raise ValueError(f"{self.kind} kernel is not radial")

    # -- derived kernels ------------------------------------------------
    def with_shift(self, shift: float) -> "Kernel":
        return replace(self, shift=float(shift))

    def with_epsilon(self, epsilon: float) -> "Kernel":
        return replace(self, diagonal="regularized", epsilon=float(epsilon))

    def resolved(self, grid) -> "Kernel":
        """Fix an automatic epsilon to half the minimal spacing of ``grid``."""
        if self.diagonal == "regularized" and self.epsilon is None and self.singular:
            h = min_spacing(grid)
            if not np.isfinite(h):
                raise ValueError("cannot infer epsilon from a one-point grid")
            return self.with_epsilon(h / 2)
        return self

    def nonnegative_on(self, grid) -> "Kernel":
        """Return this kernel shifted so it is nonnegative on ``grid``.

        The shift is ``max(0, -min k)`` over the grid, recorded in ``shift``;
        for probability measures every energy grows by exactly that constant.
        """
        g = as_grid(grid)
        base = replace(self, shift=0.0).resolved(g)
        lo = float(np.min(_matrix(base, g, g, diagonal=True)))
        return replace(self, shift=max(0.0, -lo))

    # -- evaluation ----------------------------------------------------
    def pairwise(self, X, Y) -> np.ndarray:
        """Matrix of k(x_i, y_j); coincident points follow the diagonal policy."""
        return _matrix(self, as_grid(X), as_grid(Y), diagonal=True)

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)


def _check_profile(H):
    t = np.linspace(-5.0, 50.0, 1101)
    v = np.asarray(H(t), dtype=float)
    if not np.all(np.isfinite(v)) or v.min() < 0:
        raise ValueError("Carleson profile H must be finite and nonnegative")
    if np.any(np.diff(v) < -1e-12 * (1 + np.abs(v[1:]))):
        raise ValueError("Carleson profile H must be nondecreasing")
    if np.any(np.diff(v, 2) < -1e-9 * (1 + np.abs(v[2:]))):
        raise ValueError("Carleson profile H must be convex")


def _table_index(kernel: Kernel, P: np.ndarray) -> np.ndarray:
    g = kernel.table_grid
    if P.shape[1] != g.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape[1]} vs {g.shape[1]}")
    idx = np.empty(P.shape[0], dtype=int)
    for i, p in enumerate(P):
        hit = np.flatnonzero(np.all(g == p, axis=1))
        if hit.size == 0:
            raise ValueError(f"point {p} is not on the tabulated kernel's grid")
        idx[i] = hit[0]
    return idx


def _matrix(kernel: Kernel, X: np.ndarray, Y: np.ndarray, diagonal: bool) -> np.ndarray:
    if kernel.kind == "table":
        ix, iy = _table_index(kernel, X), _table_index(kernel, Y)
        return kernel.table[np.ix_(ix, iy)] + kernel.shift
    r = distances(X, Y)
    vals = kernel.radial(r)
    zero = r == 0
    if diagonal and zero.any() and kernel.singular:
        if kernel.diagonal == "infinite":
            vals[zero] = np.inf
        elif kernel.epsilon is None:
            raise ValueError("regularized kernel has no epsilon; call resolved(grid)")
        else:
            vals[zero] = kernel.radial(np.array([kernel.epsilon]))[0]
    return vals + kernel.shift


def eval_kernel(kernel: Kernel, x, y) -> float:
    """k(x, y) as an extended real. Coincident points of a singular kernel
    give ``inf`` under the infinite policy and ``k(epsilon)`` when
    regularized."""
    px, py = as_point(x), as_point(y)
    if px.shape != py.shape:
        raise ValueError(f"dimension mismatch: {px.shape[0]} vs {py.shape[0]}")
    return float(_matrix(kernel, px[None, :], py[None, :], diagonal=True)[0, 0])


@dataclass(frozen=True)
class EnergyMatrix:
    """Symmetric matrix of kernel values on a grid.

    Off-diagonal entries are exact kernel evaluations; the diagonal uses
    ``regularization`` for singular kernels.
    """

    entries: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)
    regularization: float | None
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def quad(self, w) -> float:
        """``w @ K @ w`` with exactly rounded final summation."""
        w = np.asarray(w, dtype=float)
        return math.fsum(w * (self.entries @ w))


def assemble_energy_matrix(kernel: Kernel, grid, epsilon: float | None = None) -> EnergyMatrix:
    """Assemble K[i, j] = k(x_i, x_j) on a grid of distinct points.

    ``epsilon`` overrides the kernel's own regularization length. Singular
    kernels under the infinite diagonal policy are rejected because the
    matrix must be finite.
    """
    g = as_grid(grid)
    if g.shape[0] == 0:
        raise ValueError("grid is empty")
    if g.shape[0] > 1 and min_spacing(g) == 0:
        raise ValueError("grid has duplicate points")
    if epsilon is not None:
        kernel = kernel.with_epsilon(epsilon)
    if kernel.singular:
        if kernel.diagonal == "infinite":
            raise ValueError("singular kernel with infinite diagonal gives a non-finite "
                             "energy matrix; use a regularized policy")
        if kernel.epsilon is None:
            if g.shape[0] == 1:
                raise ValueError("one-point grid needs an explicit epsilon")
            kernel = kernel.resolved(g)
    K = _matrix(kernel, g, g, diagonal=True)
    if not np.all(np.isfinite(K)):
        raise ValueError("energy matrix has non-finite entries")
    K = 0.5 * (K + K.T)
    reg = kernel.epsilon if kernel.singular else None
    return EnergyMatrix(K, g, reg, kernel.shift)


@dataclass
class AdmissibilityResult:
    admissible: bool
    estimate: float
    levels: int

    def __bool__(self):
        return self.admissible


def carleson_admissible(kernel: Kernel, dimension: int, A: float = 1.0,
                        rtol: float = 1e-6, max_levels: int = 80) -> AdmissibilityResult:
    """Decide numerically whether ``int_0^A k(r) r^(d-1) dr`` is finite.

    The integral is split at ``A/2, A/4, ...``; each dyadic piece is integrated
    by adaptive quadrature and the remaining tail is extrapolated from the
    ratio of successive pieces. The integral is declared finite once the
    extrapolated value moves by less than ``rtol`` (relative) over three
    successive levels.
    """
    if not kernel.is_radial:
        raise NotImplementedError(f"{kernel.kind} kernel is not radial")
    if not A > 0:
        raise ValueError("A must be positive")

    def f(r):
        return float(kernel.radial(np.array([r]))[0]) * r ** (dimension - 1)

    total = 0.0
    pieces: list[float] = []
    estimates: list[float] = []
    hi = A
    for level in range(max_levels):
        lo = hi / 2
        val, _ = integrate.quad(f, lo, hi, limit=200, epsabs=0.0, epsrel=1e-12)
        total += val
        pieces.append(val)
        hi = lo
        if len(pieces) < 2:
            continue
        prev = pieces[-2]
        rho = pieces[-1] / prev if prev != 0 else 0.0
        if not (0 <= rho < 1):
            estimates.append(math.inf)
            continue
        est = total + pieces[-1] * rho / (1 - rho)
        estimates.append(est)
        if len(estimates) >= 4:
            window = estimates[-4:]
            if all(np.isfinite(window)):
                ref = max(abs(window[-1]), 1e-300)
                if max(abs(a - b) for a, b in zip(window[1:], window[:-1])) < rtol * ref:
                    return AdmissibilityResult(True, est, level + 1)
    return AdmissibilityResult(False, math.inf, max_levels)
