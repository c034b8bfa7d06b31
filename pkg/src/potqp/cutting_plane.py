"""Constraint generation over Z for energy minimization under a continuum of
moment constraints ``int Phi(x, z) dmu(x) = g(z)`` (or ``>= g(z)``), z in Z.

Each outer iteration solves the energy QP with the constraints for the
current finite set Z_n, evaluates ``Psi_n(z) = int Phi(., z) dmu_n - g(z)``
on the whole Z grid and adds the worst points. The feasible sets are nested,
so the energies never decrease.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy_qp import SolveReport, minimize_energy
from .kernel import EnergyMatrix, as_grid, assemble_energy_matrix
from .measure import DiscreteMeasure, apply_pointwise
from .polytope import EQ, GEQ, FeasiblePolytope, InfeasibleError, check_feasible

CONVERGED_ZERO = "ConvergedPsiZero"
CONVERGED_NONNEG = "ConvergedPsiNonneg"
MAX_ITER = "MaxIter"
INNER_INFEASIBLE = "InnerInfeasible"

GOLDEN_STEPS = 20
STALL_ROUNDS = 3


@dataclass
class IterationRecord:
    iter: int
    z_set: list
    energy: float
    psi_min: float
    psi_max: float
    psi_supnorm: float

    @property
    def n_constraints(self) -> int:
        return len(self.z_set)


@dataclass
class CuttingPlaneTrace:
    records: list = field(default_factory=list)
    status: str = ""
    message: str = ""
    z_set: list = field(default_factory=list)
    sensitivity: float = np.nan

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def monotone(self, tol: float = 1e-10) -> bool:
        e = self.energies
        return bool(np.all(np.diff(e) >= -tol))

    def to_csv(self, path) -> None:
        write_trace_csv(path, self)


@dataclass
class CuttingPlaneResult:
    trace: CuttingPlaneTrace
    measure: DiscreteMeasure | None
    report: SolveReport | None = field(repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def status(self) -> str:
        return self.trace.status


def write_trace_csv(path, trace: CuttingPlaneTrace) -> None:
    lines = ["iter,n_constraints,energy,psi_min,psi_max,psi_supnorm"]
    for r in trace.records:
        lines.append(f"{r.iter},{r.n_constraints},{r.energy!r},{r.psi_min!r},"
                     f"{r.psi_max!r},{r.psi_supnorm!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _z_key(z):
    return tuple(np.atleast_1d(np.asarray(z, dtype=float)).tolist())


def _z_value(z):
    a = np.asarray(z, dtype=float)
    return float(a) if a.ndim == 0 or a.size == 1 else a


class _Problem:
    """Shared data: energy matrix on X, Phi sampled on the Z grid."""

    def __init__(self, kernel, X_grid, Phi, g, Z_grid, K=None):
        self.X = as_grid(X_grid)
        if K is None:
            if isinstance(kernel, EnergyMatrix):
                K = kernel
            else:
                K = assemble_energy_matrix(kernel, self.X)
        self.K = K
        self.Phi = Phi
        self.g = g
        Z = np.asarray(Z_grid, dtype=float)
        if Z.size == 0:
            raise ValueError("Z grid is empty")
        self.Z = Z.reshape(-1) if Z.ndim <= 1 or Z.shape[1] == 1 else Z
        self.z_list = [_z_value(z) for z in self.Z]
        self.rows = np.vstack([self.row(z) for z in self.z_list])
        self.gz = np.array([self.target(z) for z in self.z_list])

    def row(self, z) -> np.ndarray:
        r = apply_pointwise(lambda x: self.Phi(x, z), self.X)
        if not np.all(np.isfinite(r)):
            raise ArithmeticError(f"Phi(., {z}) is not finite on the X grid")
        return r

    def target(self, z) -> float:
        v = float(self.g(z))
        if not math.isfinite(v):
            raise ArithmeticError(f"g({z}) is not finite")
        return v

    def psi_grid(self, w) -> np.ndarray:
        return self.rows @ w - self.gz

    def psi_at(self, w, z) -> float:
        return math.fsum(self.row(z) * w) - self.target(z)

    def polytope(self, z_set, sense, rank_tol) -> FeasiblePolytope:
        N = self.X.shape[0]
        rows = [np.ones(N)] + [self.row(z) for z in z_set]
        c = [1.0] + [self.target(z) for z in z_set]
        return FeasiblePolytope(self.X, np.vstack(rows), np.array(c), [EQ] + [sense] * len(z_set),
                                rank_tol)


def _golden(f, a, b, steps):
    """Minimize ``f`` on [a, b] by golden-section search."""
    invphi = (math.sqrt(5) - 1) / 2
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(steps):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _candidates(prob: _Problem, w, psi, which: str, refine: bool):
    """Grid indices ordered from worst to best, plus a refined first choice.

    ``which`` is ``"min"`` or ``"max"``. Returns a list of z values.
    """
    sgn = 1.0 if which == "min" else -1.0
    order = np.argsort(sgn * psi, kind="stable")
    out = []
    if refine and prob.Z.ndim == 1 and len(prob.Z) > 2:
        k = int(order[0])
        zs = np.sort(prob.Z)
        pos = int(np.searchsorted(zs, prob.Z[k]))
        a = zs[max(pos - 1, 0)]
        b = zs[min(pos + 1, len(zs) - 1)]
        if b > a:
            z_star, f_star = _golden(lambda z: sgn * prob.psi_at(w, z), float(a), float(b),
                                     GOLDEN_STEPS)
            if f_star < sgn * psi[k]:
                out.append(float(z_star))
    out.extend(prob.z_list[int(i)] for i in order)
    return out


def _run(kernel, X_grid, Phi, g, Z_grid, tol_psi, max_outer, inner_tol, sense,
         z_init=None, refine=True, rank_tol=1e-10, K=None, inner_kw=None) -> CuttingPlaneResult:
    prob = _Problem(kernel, X_grid, Phi, g, Z_grid, K)
    inner_kw = dict(inner_kw or {})
    if z_init is None:
        z_init = prob.z_list[:2]
    z_set = []
    keys = set()
    for z in z_init:
        if _z_key(z) not in keys:
            keys.add(_z_key(z))
            z_set.append(_z_value(z))
    trace = CuttingPlaneTrace()
    w_prev = None
    report = None
    it = 0
    stalled = 0
    while True:
        p = prob.polytope(z_set, sense, rank_tol)
        feas = check_feasible(p)
        if not feas:
            trace.status = INNER_INFEASIBLE
            trace.message = (f"discrete inner problem infeasible for Z_set of size {len(z_set)} "
                             f"(certificate gap {feas.certificate.gap:.3g}); the continuous "
                             "problem may still be feasible on a finer X grid")
            break
        report = minimize_energy(prob.K, p, tol=inner_tol, w0=w_prev, **inner_kw)
        w = report.weights
        psi = prob.psi_grid(w)
        trace.records.append(IterationRecord(it, list(z_set), report.value, float(psi.min()),
                                             float(psi.max()), float(np.abs(psi).max())))
        # New rows that lie in the numerical span of Z_set leave the iterate unchanged.
        stalled = stalled + 1 if w_prev is not None and np.array_equal(w, w_prev) else 0
        w_prev = w
        if sense == EQ and np.abs(psi).max() <= tol_psi:
            trace.status = CONVERGED_ZERO
            break
        if sense == GEQ and psi.min() >= -tol_psi:
            trace.status = CONVERGED_NONNEG
            break
        if it >= max_outer:
            trace.status = MAX_ITER
            trace.message = f"no convergence within {max_outer} outer iterations"
            break
        if stalled >= STALL_ROUNDS:
            trace.status = MAX_ITER
            trace.message = (f"stalled at sup|Psi| = {np.abs(psi).max():.3g}: the last "
                             f"{stalled} rounds of constraints were numerically dependent on "
                             "Z_set (rank_tol) and did not move the solution")
            break
        added = 0
        for which in (("min", "max") if sense == EQ else ("min",)):
            for z in _candidates(prob, w, psi, which, refine):
                if _z_key(z) not in keys:
                    keys.add(_z_key(z))
                    z_set.append(z)
                    added += 1
                    break
        if added == 0:
            trace.status = MAX_ITER
            trace.message = "every candidate z is already in Z_set; no new constraint to add"
            break
        it += 1
    trace.z_set = list(z_set)
    if report is None:
        return CuttingPlaneResult(trace, None, None, None)
    trace.sensitivity = _sensitivity(prob, report.weights, z_set)
    mu = DiscreteMeasure.on_grid(prob.X, report.weights)
    return CuttingPlaneResult(trace, mu, report, report.weights)


def _sensitivity(prob: _Problem, w, z_set) -> float:
    """l1 norm of the constraint multipliers of the generated rows, a first
    order bound on the energy change per unit of constraint slack."""
    S = np.flatnonzero(w > 0)
    if S.size == 0:
        return float("nan")
    F = np.vstack([np.ones(prob.X.shape[0])] + [prob.row(z) for z in z_set])
    grad = 2.0 * (prob.K.entries @ w)
    lam, *_ = np.linalg.lstsq(F[:, S].T, grad[S], rcond=1e-10)
    return float(np.abs(lam[1:]).sum())


def run_equality(kernel, X_grid, Phi, g, Z_grid, tol_psi: float = 1e-6, max_outer: int = 50,
                 inner_tol: float = 1e-8, **kw) -> CuttingPlaneResult:
    """Constraint generation for ``int Phi(x, z) dmu = g(z)`` on all of Z.

    Parameters
    ----------
    kernel : Kernel or EnergyMatrix
        Interaction on ``X_grid``.
    Phi : callable
        ``Phi(x, z)``, vectorized in ``x`` for a fixed ``z``.
    g : callable
        Targets ``g(z)``.
    Z_grid : array
        Finite sample of Z; the first two points start the constraint set
        unless ``z_init`` is given.
    tol_psi : float
        Stop when ``max |Psi_n| <= tol_psi`` on the Z grid.
    max_outer : int
        Number of constraint-adding rounds allowed after the first solve.

    Other keywords: ``z_init``, ``refine`` (golden-section refinement of the
    extrema for 1-D Z), ``rank_tol``, ``K`` (precomputed EnergyMatrix),
    ``inner_kw`` (passed to ``minimize_energy``).
    """
    return _run(kernel, X_grid, Phi, g, Z_grid, tol_psi, max_outer, inner_tol, EQ, **kw)


def run_inequality(kernel, X_grid, Phi, g, Z_grid, tol_psi: float = 1e-6, max_outer: int = 50,
                   inner_tol: float = 1e-8, **kw) -> CuttingPlaneResult:
    """Constraint generation for ``int Phi(x, z) dmu >= g(z)``; one point (the
    minimizer of Psi_n) is added per round. Same parameters as
    ``run_equality``."""
    return _run(kernel, X_grid, Phi, g, Z_grid, tol_psi, max_outer, inner_tol, GEQ, **kw)


def all_constraints_solve(kernel, X_grid, Phi, g, Z_grid, sense=EQ, inner_tol: float = 1e-8,
                          rank_tol: float = 1e-10, K=None, **inner_kw) -> SolveReport:
    """Single energy QP with every Z-grid constraint imposed at once."""
    prob = _Problem(kernel, X_grid, Phi, g, Z_grid, K)
    p = prob.polytope(prob.z_list, sense, rank_tol)
    res = check_feasible(p)
    if not res:
        raise InfeasibleError("all-constraints polytope is infeasible", res.certificate)
    return minimize_energy(prob.K, p, tol=inner_tol, **inner_kw)


__all__ = ["run_equality", "run_inequality", "all_constraints_solve", "CuttingPlaneTrace",
           "CuttingPlaneResult", "IterationRecord", "write_trace_csv", "CONVERGED_ZERO",
           "CONVERGED_NONNEG", "MAX_ITER", "INNER_INFEASIBLE"]
