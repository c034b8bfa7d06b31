"""Numerical checks of structural identities on computed solutions.

These checks can falsify, never prove: every report carries the margins and
the resolution at which an identity was observed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .energy_qp import SolveReport, minimize_energy
from .kelley import kelley_maxmin, kelley_minmax
from .kernel import EnergyMatrix, Kernel, as_grid, assemble_energy_matrix, min_spacing
from .measure import DiscreteMeasure, potentials
from .polytope import FeasiblePolytope, require_feasible
from .saddle import EXACT, EXACT_MAX_N, HEURISTIC, ChebyshevSequence, chebyshev_sequence, dual_q


def _fmt(d: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in d.items())


@dataclass
class FrostmanReport:
    sup_on_support: float
    sup_global: float
    margin: float
    passed: bool
    argmax: np.ndarray = field(repr=False)
    tol: float = 0.0
    n_probes: int = 0
    adjacency: float = 0.0

    def to_text(self) -> str:
        return _fmt({
            "check": "maximum principle (sup over space vs sup over support)",
            "result": "pass" if self.passed else "fail",
            "sup_on_support": repr(self.sup_on_support),
            "sup_global": repr(self.sup_global),
            "margin": repr(self.margin),
            "tol": repr(self.tol),
            "argmax": np.array2string(self.argmax, precision=6),
            "probes": self.n_probes,
            "adjacency_radius": repr(self.adjacency),
            "note": "numerical falsification test; a pass is not a proof",
        })


def frostman_check(kernel: Kernel, mu: DiscreteMeasure, probe_grid, tol: float = 5e-3,
                   adjacency: float | None = None) -> FrostmanReport:
    """Compare ``max U^mu`` over all probes with its max over probes next to atoms.

    The potential is evaluated with the kernel's diagonal policy (use a
    regularized kernel for singular ones). A probe is atom-adjacent when it
    lies within ``adjacency`` of an atom; the default is the probe grid's
    minimal spacing, i.e. the support seen at grid resolution. The nearest
    probe of every atom always counts. Passes iff
    ``sup_global <= sup_on_support + tol``.
    """
    probes = as_grid(probe_grid)
    if probes.shape[1] != mu.dim:
        raise ValueError("probe grid and measure dimensions differ")
    live = mu.weights > 0
    atoms = mu.points[live]
    if kernel.singular and kernel.diagonal == "regularized" and kernel.epsilon is None:
        kernel = kernel.resolved(probes)
    if adjacency is None:
        h = min_spacing(probes)
        adjacency = h * (1 + 1e-9) if np.isfinite(h) else 0.0
    U = potentials(kernel, DiscreteMeasure(atoms, mu.weights[live], False), probes)
    dist, _ = cKDTree(atoms).query(probes)
    adjacent = dist <= adjacency
    _, near = cKDTree(probes).query(atoms)
    adjacent[np.atleast_1d(near)] = True
    s_sup = float(np.max(U[adjacent]))
    g_arg = int(np.argmax(U))
    g_sup = float(U[g_arg])
    margin = g_sup - s_sup
    return FrostmanReport(s_sup, g_sup, margin, bool(margin <= tol), probes[g_arg], tol,
                          probes.shape[0], float(adjacency))


@dataclass
class ChainReport:
    w: float
    q: float
    q_bounds: tuple
    sequence: ChebyshevSequence = field(repr=False)
    M_estimate: float
    deltas: dict
    one_sided_ok: bool
    mode: str
    resolution: tuple
    solve: SolveReport = field(repr=False, default=None)

    def to_text(self) -> str:
        seq = ", ".join(f"{m}:{v:.12g}" for m, v in sorted(self.sequence.values.items()))
        return _fmt({
            "check": "energy / inf-sup / sup-inf ladder",
            "w": repr(self.w),
            "q": repr(self.q),
            "q_bounds": self.q_bounds,
            "qbar_sequence": "{" + seq + "}",
            "qbar_mode": self.mode,
            "quasi_monotonicity_defect": repr(self.sequence.defect),
            "M_estimate": repr(self.M_estimate),
            "abs_w_minus_q": repr(self.deltas["w_q"]),
            "abs_M_minus_w": repr(self.deltas["M_w"]),
            "w_le_q": "pass" if self.one_sided_ok else "fail",
            "resolution": f"N={self.resolution[0]}, m_max={self.resolution[1]}",
            "status": "equality observed at this resolution; hypotheses not verified",
        })


def equality_chain_report(K, p: FeasiblePolytope, m_max: int, mode: str | None = None,
                          seed: int = 0, tol: float = 1e-9, budget: int = 5000) -> ChainReport:
    """Compute ``w`` (energy QP), ``q`` (inf-sup) and the ``qbar_m`` ladder.

    ``mode`` defaults to exact enumeration when ``N <= 20`` and heuristic
    search otherwise.
    """
    if isinstance(K, Kernel):
        K = assemble_energy_matrix(K, p.grid)
    Km = K.entries if isinstance(K, EnergyMatrix) else np.asarray(K, dtype=float)
    require_feasible(p)
    if mode is None:
        mode = EXACT if p.n <= EXACT_MAX_N else HEURISTIC
    sol = minimize_energy(Km, p, tol=min(tol, 1e-8))
    qr = dual_q(Km, p, tol=tol)
    seq = chebyshev_sequence(Km, p, m_max, mode=mode, seed=seed, budget=budget)
    deltas = {"w_q": abs(sol.value - qr.value), "M_w": abs(seq.M_estimate - sol.value)}
    return ChainReport(sol.value, qr.value, (qr.lower, qr.upper), seq, seq.M_estimate, deltas,
                       bool(sol.value <= qr.value + 1e-9), mode, (p.n, m_max), sol)


@dataclass
class SwapReport:
    lhs: float
    rhs: float
    gap: float
    one_sided_ok: bool
    lhs_bounds: tuple
    rhs_bounds: tuple
    mu: np.ndarray = field(repr=False, default=None)
    nu: np.ndarray = field(repr=False, default=None)

    def to_text(self) -> str:
        return _fmt({
            "check": "two-set minimax swap",
            "lhs_sup_inf": repr(self.lhs),
            "rhs_inf_sup": repr(self.rhs),
            "gap": repr(self.gap),
            "lhs_bounds": self.lhs_bounds,
            "rhs_bounds": self.rhs_bounds,
            "lhs_le_rhs": "pass" if self.one_sided_ok else "fail",
        })


def two_set_swap_check(K, pA: FeasiblePolytope, pB: FeasiblePolytope,
                       tol: float = 1e-9) -> SwapReport:
    """``sup_{mu in A} min_{nu in Ex B} mu K nu`` against
    ``inf_{nu in B} max_{mu in Ex A} mu K nu``.

    ``K`` is the kernel matrix between ``pA.grid`` (rows) and ``pB.grid``
    (columns), or a Kernel to be evaluated there. Both sides are computed by
    independent Kelley runs.
    """
    if isinstance(K, Kernel):
        k = K
        if k.singular and k.diagonal == "regularized" and k.epsilon is None:
            k = k.resolved(np.vstack([pA.grid, pB.grid]) if pA.grid.shape != pB.grid.shape
                           or not np.array_equal(pA.grid, pB.grid) else pA.grid)
        Km = k.pairwise(pA.grid, pB.grid)
    elif isinstance(K, EnergyMatrix):
        Km = K.entries
    else:
        Km = np.asarray(K, dtype=float)
    require_feasible(pA, "side A polytope")
    require_feasible(pB, "side B polytope")
    left = kelley_maxmin(pA, Km, pB, tol=tol)
    right = kelley_minmax(pB, Km.T, pA, tol=tol)
    gap = abs(left.value - right.value)
    return SwapReport(left.value, right.value, gap, bool(left.value <= right.value + 1e-9),
                      (left.lower, left.upper), (right.lower, right.upper),
                      left.weights, right.weights)
