"""Inf-sup and sup-inf of the mutual energy over a moment polytope, and the
ladder of support-restricted sup-inf values (Chebyshev constants).

With ``R`` the polytope and ``Ex R`` its vertices,

* ``q = min_{w in R} max_{v in Ex R} w K v`` (``dual_q``),
* ``qbar_m = max_{w in R, |supp w| <= m} min_{v in Ex R} w K v``
  (``lower_qbar``).

Inner problems over ``Ex R`` are single LPs, since a linear functional is
optimized at a vertex. Outer problems are solved by Kelley's method.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .kelley import kelley_maxmin, kelley_minmax
from .kernel import EnergyMatrix
from .polytope import (FeasiblePolytope, check_feasible, lp_optimize, require_feasible,
                       restrict)

EXACT, HEURISTIC = "exact", "heuristic"
EXACT_MAX_N = 20


def _entries(K) -> np.ndarray:
    return K.entries if isinstance(K, EnergyMatrix) else np.asarray(K, dtype=float)


@dataclass
class QResult:
    value: float
    weights: np.ndarray = field(repr=False)
    lower: float
    upper: float
    iterations: int
    converged: bool


def dual_q(K, p: FeasiblePolytope, tol: float = 1e-9, max_iter: int = 5000) -> QResult:
    """``q = inf_w max_{v in Ex p} w K v`` by Kelley's method.

    ``lower <= value = upper`` bracket the optimum on return; ``converged``
    means ``upper - lower <= tol``.
    """
    Km = _entries(K)
    if Km.shape != (p.n, p.n):
        raise ValueError("energy matrix does not match the polytope grid")
    require_feasible(p)
    r = kelley_minmax(p, Km, p, tol=tol, max_iter=max_iter)
    return QResult(r.value, r.weights, r.lower, r.upper, r.iterations, r.converged)


@dataclass
class QbarResult:
    """Support-restricted sup-inf. ``status`` is ``"ok"`` or ``"empty"`` (no
    feasible measure with at most ``m`` atoms on the grid)."""

    value: float
    support: tuple
    weights: np.ndarray | None = field(repr=False)
    m: int
    mode: str
    status: str = "ok"
    evaluations: int = 0
    seed: int | None = None


def _support_value(Km, p, S, tol, cache):
    key = tuple(sorted(S))
    if key in cache:
        return cache[key]
    face = restrict(p, key)
    if not check_feasible(face):
        cache[key] = (-np.inf, None)
        return cache[key]
    r = kelley_maxmin(face, Km[list(key), :], p, tol=tol)
    w = np.zeros(p.n)
    w[list(key)] = r.weights
    cache[key] = (r.value + 0.0, w)  # no negative zeros in reports
    return cache[key]


def lower_qbar(K, p: FeasiblePolytope, m: int, mode: str = EXACT, budget: int = 5000,
               seed: int = 0, starts: int = 8, tol: float = 1e-10) -> QbarResult:
    """Sup over measures with at most ``m`` grid atoms of the worst-case
    mutual energy against the polytope's vertices.

    Parameters
    ----------
    m : int
        Support budget (number of atoms), ``m >= 1``.
    mode : {"exact", "heuristic"}
        ``exact`` enumerates every support of size ``min(m, N)``; enlarging a
        support only enlarges the feasible face, so this covers all smaller
        supports. Requires ``N <= 20``. ``heuristic`` runs a seeded multistart
        support-exchange local search, then spends what is left of ``budget``
        (support evaluations) on kicked restarts from the incumbent.
    """
    Km = _entries(K)
    N = p.n
    if m < 1:
        raise ValueError("support budget m must be >= 1")
    if mode not in (EXACT, HEURISTIC):
        raise ValueError(f"unknown mode {mode!r}")
    require_feasible(p)
    size = min(m, N)
    cache: dict = {}
    if size == N:
        val, w = _support_value(Km, p, range(N), tol, cache)
        return QbarResult(val, tuple(range(N)), w, m, mode, "ok", 1,
                          None if mode == EXACT else seed)
    if mode == EXACT:
        if N > EXACT_MAX_N:
            raise ValueError(f"exact mode supports N <= {EXACT_MAX_N}, got N = {N}")
        best = (-np.inf, None, None)
        for S in itertools.combinations(range(N), size):
            val, w = _support_value(Km, p, S, tol, cache)
            if val > best[0]:
                best = (val, S, w)
        return _qbar_from(best, m, mode, len(cache), None)
    best = _local_search(Km, p, size, budget, seed, starts, tol, cache)
    return _qbar_from(best, m, mode, len(cache), seed)


def _qbar_from(best, m, mode, evals, seed):
    val, S, w = best
    if S is None or not np.isfinite(val):
        return QbarResult(-np.inf, (), None, m, mode, "empty", evals, seed)
    return QbarResult(val, tuple(S), w, m, mode, "ok", evals, seed)


def _local_search(Km, p, size, budget, seed, starts, tol, cache):
    rng = np.random.default_rng(seed)
    N = p.n
    tree = cKDTree(p.grid)
    k_nb = min(N, 2 * p.grid.shape[1] + 1)
    _, nbrs = tree.query(p.grid, k=k_nb)
    nbrs = np.atleast_2d(nbrs)

    def climb(S):
        val, w = _support_value(Km, p, S, tol, cache)
        improved = True
        while improved and len(cache) < budget:
            improved = False
            # Cheap local moves first, the full one-swap neighbourhood after.
            for moves in (_moves, _all_swaps):
                for cand in moves(Km, p, S, w, nbrs):
                    if len(cache) >= budget:
                        break
                    v2, w2 = _support_value(Km, p, cand, tol, cache)
                    if v2 > val + 1e-12:
                        S, val, w, improved = cand, v2, w2, True
                        break
                if improved:
                    break
        return val, tuple(sorted(S)), w

    best = (-np.inf, None, None)
    for s in range(starts):
        if len(cache) >= budget:
            break
        S = _initial_support(p, size, rng, spread=(s == 0))
        if S is not None:
            best = max(best, climb(S), key=lambda r: r[0])
    # Iterated local search: kick the incumbent by moving two or three atoms.
    idle = 0
    while best[1] is not None and len(cache) < budget and idle < 200 and size < N:
        before = len(cache)
        r = climb(_kick(best[1], N, nbrs, rng, 2 + int(rng.integers(0, 2))))
        if r[0] > best[0] + 1e-12:
            best = r
        # Stop once kicks only revisit cached supports.
        idle = idle + 1 if len(cache) == before else 0
    return best


def _kick(S, N, nbrs, rng, k=2):
    """Replace ``k`` atoms: each either shifts to a random grid neighbour or
    jumps to a random free point."""
    S = list(S)
    for a in rng.choice(len(S), size=min(k, len(S)), replace=False):
        free = np.setdiff1d(np.arange(N), S)
        if free.size == 0:
            break
        near = [int(b) for b in nbrs[S[a]][1:] if b not in S]
        S[a] = int(rng.choice(near)) if near and rng.random() < 0.5 else int(rng.choice(free))
    return tuple(sorted(set(S))) if len(set(S)) == len(S) else tuple(sorted(S))


def _initial_support(p, size, rng, spread):
    N = p.n
    if spread and p.grid.shape[1] == 1:
        order = np.argsort(p.grid[:, 0], kind="stable")
        S = set(order[np.round(np.linspace(0, N - 1, size)).astype(int)].tolist())
    else:
        v, _ = lp_optimize(p, rng.normal(size=N), "min")
        S = set(v.support)
        if len(S) > size:
            return None
    rest = [j for j in rng.permutation(N).tolist() if j not in S]
    S |= set(rest[:size - len(S)])
    return tuple(sorted(S))


def _moves(Km, p, S, w, nbrs):
    """Candidate supports: shift an atom to a grid neighbour, or swap the
    lightest atom for a point where the potential is smallest."""
    Sset = set(S)
    out = []
    for a in S:
        for b in nbrs[a][1:]:
            b = int(b)
            if b not in Sset:
                out.append(tuple(sorted(Sset - {a} | {b})))
    if w is not None:
        pot = Km @ w
        low = [int(j) for j in np.argsort(pot, kind="stable") if j not in Sset][:3]
        light = sorted(S, key=lambda j: (w[j], j))[:2]
        for a in light:
            for b in low:
                out.append(tuple(sorted(Sset - {a} | {b})))
    seen, uniq = set(), []
    for c in out:
        if c not in seen:
            seen.add(c)
            uniq.append(c)
    return uniq


def _all_swaps(Km, p, S, w, nbrs):
    Sset = set(S)
    pot = Km @ w if w is not None else np.zeros(p.n)
    outside = [int(j) for j in np.argsort(pot, kind="stable") if j not in Sset]
    inside = sorted(S, key=lambda j: (w[j], j)) if w is not None else list(S)
    return [tuple(sorted(Sset - {a} | {b})) for b in outside for a in inside]


@dataclass
class ChebyshevSequence:
    values: dict
    mode: str
    witnesses: dict = field(repr=False)
    defect: float = 0.0
    M_estimate: float = np.nan
    seed: int | None = None

    def to_csv(self, path) -> None:
        write_sequence_csv(path, self)


def quasi_monotonicity_defect(values: dict) -> float:
    """``max [(m q_m + n q_n)/(m+n) - q_{m+n}]_+`` over recorded pairs."""
    worst = 0.0
    ms = sorted(k for k, v in values.items() if np.isfinite(v))
    top = max(ms, default=0)
    for a in ms:
        for b in ms:
            if a + b > top or (a + b) not in values or not np.isfinite(values[a + b]):
                continue
            d = (a * values[a] + b * values[b]) / (a + b) - values[a + b]
            worst = max(worst, d)
    return float(worst)


def chebyshev_sequence(K, p: FeasiblePolytope, m_max: int, mode: str = EXACT,
                       seed: int = 0, budget: int = 5000, tol: float = 1e-10) -> ChebyshevSequence:
    """``qbar_m`` for ``m = 1..m_max`` and ``M_estimate = qbar_{m_max}``."""
    if m_max < 2:
        raise ValueError("m_max must be >= 2")
    values, witnesses = {}, {}
    for m in range(1, m_max + 1):
        r = lower_qbar(K, p, m, mode=mode, budget=budget, seed=seed, tol=tol)
        values[m] = r.value
        witnesses[m] = r
    return ChebyshevSequence(values, mode, witnesses, quasi_monotonicity_defect(values),
                             values[m_max], None if mode == EXACT else seed)


def write_sequence_csv(path, seq: ChebyshevSequence) -> None:
    lines = ["m,qbar,mode"]
    for m in sorted(seq.values):
        lines.append(f"{m},{seq.values[m]!r},{seq.mode}")
    Path(path).write_text("\n".join(lines) + "\n")


def minimax_gap(K, p: FeasiblePolytope, tol: float = 1e-10) -> tuple[float, float]:
    """``(sup_w min_v, inf_w max_v)`` over the whole polytope."""
    Km = _entries(K)
    lo = kelley_maxmin(p, Km, p, tol=tol).value
    hi = kelley_minmax(p, Km, p, tol=tol).value
    return lo, hi


__all__ = ["dual_q", "lower_qbar", "chebyshev_sequence", "ChebyshevSequence", "QResult",
           "QbarResult", "quasi_monotonicity_defect", "write_sequence_csv", "minimax_gap",
           "EXACT", "HEURISTIC"]
