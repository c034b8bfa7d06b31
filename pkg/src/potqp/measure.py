"""Discrete measures: potentials, mutual energies, moments and the
constraint-violation function psi(z) = int Phi(x, z) dmu(x) - g(z)."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernel import Kernel, as_grid, as_point

PRUNE_BELOW = 1e-15


def apply_pointwise(f, X: np.ndarray) -> np.ndarray:
    """Evaluate a vectorized point function on ``X`` of shape (M, d).

    One-dimensional problems pass the coordinate vector ``X[:, 0]``,
    higher dimensions pass ``X`` itself.
    """
    arg = X[:, 0] if X.shape[1] == 1 else X
    vals = np.asarray(f(arg), dtype=float)
    return np.broadcast_to(vals, (X.shape[0],)).astype(float)


@dataclass
class DiscreteMeasure:
    """Finite sum of weighted point masses."""

    points: np.ndarray = field(repr=False)
    weights: np.ndarray
    is_probability: bool = True

    def __post_init__(self):
        self.points = as_grid(self.points)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points and weights differ in length")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and nonnegative")
        if self.is_probability and abs(self.mass - 1.0) > 1e-12:
            raise ValueError(f"probability measure has mass {self.mass!r}")
        if len(np.unique(self.points, axis=0)) != len(self.points):
            raise ValueError("atom points must be pairwise distinct")

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasure":
        return cls(as_point(x)[None, :], [1.0])

    @classmethod
    def on_grid(cls, grid, weights, is_probability=True, prune=True) -> "DiscreteMeasure":
        """Measure with the given weights on grid points; zero atoms dropped."""
        g = as_grid(grid)
        w = np.asarray(weights, dtype=float)
        w = np.where(np.abs(w) < PRUNE_BELOW, 0.0, w)
        if is_probability:
            w = np.maximum(w, 0.0)
            w = w / math.fsum(w)
        keep = w > 0 if prune else np.ones(len(w), dtype=bool)
        return cls(g[keep], w[keep], is_probability)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.weights))

    def normalized(self) -> "DiscreteMeasure":
        """Drop atoms below 1e-15 and rescale to unit mass if probability."""
        keep = self.weights >= PRUNE_BELOW
        w = self.weights[keep]
        if self.is_probability:
            w = w / math.fsum(w)
        return DiscreteMeasure(self.points[keep], w, self.is_probability)

    def combine(self, other: "DiscreteMeasure", a: float, b: float) -> "DiscreteMeasure":
        """The measure ``a*self + b*other`` (atoms merged)."""
        pts = np.vstack([self.points, other.points])
        w = np.concatenate([a * self.weights, b * other.weights])
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inv.reshape(-1), w)
        return DiscreteMeasure(uniq, merged, is_probability=False)


def _check_dim(mu: DiscreteMeasure, d: int):
    if mu.dim != d:
        raise ValueError(f"dimension mismatch: measure is {mu.dim}-D, point is {d}-D")


def potential(kernel: Kernel, mu: DiscreteMeasure, y) -> float:
    """U^mu(y) = sum_j w_j k(x_j, y)."""
    py = as_point(y)
    _check_dim(mu, py.shape[0])
    k = kernel.pairwise(mu.points, py[None, :])[:, 0]
    live = mu.weights > 0
    if np.any(np.isinf(k[live])):
        return math.inf
    return math.fsum(mu.weights[live] * k[live])


def potentials(kernel: Kernel, mu: DiscreteMeasure, Y) -> np.ndarray:
    """Vectorized potential on many points (BLAS summation)."""
    Yg = as_grid(Y)
    _check_dim(mu, Yg.shape[1])
    K = kernel.pairwise(Yg, mu.points)
    with np.errstate(invalid="ignore"):
        out = K @ mu.weights
    return out


def mutual_energy(kernel: Kernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """E(mu, nu) = sum_i sum_j u_i v_j k(x_i, y_j).

    The double sum is exactly rounded (``math.fsum``), so the result does not
    depend on the order of the atoms and ``E(mu, nu) == E(nu, mu)`` exactly
    for symmetric kernels.
    """
    _check_dim(mu, nu.dim)
    K = kernel.pairwise(mu.points, nu.points)
    uv = np.outer(mu.weights, nu.weights)
    live = uv > 0
    if np.any(np.isinf(K[live])):
        return math.inf
    return math.fsum((uv[live] * K[live]).ravel())


def energy(kernel: Kernel, mu: DiscreteMeasure) -> float:
    return mutual_energy(kernel, mu, mu)


def moment(mu: DiscreteMeasure, f) -> float:
    """int f dmu for a vectorized point function ``f``."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = apply_pointwise(f, mu.points)
    live = mu.weights > 0
    if not np.all(np.isfinite(vals[live])):
        bad = mu.points[live][~np.isfinite(vals[live])][0]
        raise ArithmeticError(f"moment function is not finite at atom {bad}")
    return math.fsum(mu.weights[live] * vals[live])


def psi(mu: DiscreteMeasure, Phi, g, z) -> float:
    """Constraint residual ``int Phi(x, z) dmu(x) - g(z)``."""
    return moment(mu, lambda x: Phi(x, z)) - float(g(z))


# -- CSV ----------------------------------------------------------------

_HEADER = re.compile(r"#\s*measure\s+d=(\d+)\s+mass=(\S+)")


def write_measure_csv(path, mu: DiscreteMeasure) -> None:
    lines = [f"# measure d={mu.dim} mass={mu.mass!r}"]
    for p, w in zip(mu.points, mu.weights):
        lines.append(",".join(repr(float(v)) for v in p) + f",{float(w)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_measure_csv(path, is_probability: bool | None = None) -> DiscreteMeasure:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty measure file")
    m = _HEADER.match(text[0])
    if not m:
        raise ValueError(f"{path}:1: expected '# measure d=<d> mass=<m>' header")
    d = int(m.group(1))
    rows = [ln for ln in text[1:] if ln.strip()]
    data = np.array([[float(v) for v in ln.split(",")] for ln in rows]).reshape(-1, d + 1)
    mass = float(m.group(2))
    if is_probability is None:
        is_probability = abs(mass - 1.0) <= 1e-12
    return DiscreteMeasure(data[:, :d], data[:, d], is_probability)
