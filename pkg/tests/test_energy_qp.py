import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from potqp.energy_qp import (general_objective, kkt_residual, minimize_energy, reduce_general,
                             sweep_mass)
from potqp.family import FunctionFamily
from potqp.kernel import Kernel, assemble_energy_matrix
from potqp.polytope import FeasiblePolytope, InfeasibleError, build, enumerate_vertices


def _slsqp(K, p, seeds=5):
    """Independent QP oracle: SLSQP from several random feasible-ish starts."""
    cons = [{"type": "eq", "fun": lambda w, i=i: p.F[i] @ w - p.c[i]} for i in range(p.n_rows)]
    best = np.inf
    r = np.random.default_rng(0)
    for _ in range(seeds):
        res = minimize(lambda w: w @ K @ w, r.dirichlet(np.ones(p.n)), jac=lambda w: 2 * K @ w,
                       bounds=[(0, None)] * p.n, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
        if res.success and np.abs(p.F @ res.x - p.c).max() < 1e-8:
            best = min(best, res.fun)
    return best


def test_identity_simplex():
    rep = minimize_energy(np.eye(3), FeasiblePolytope.simplex([0, 1, 2]))
    assert rep.value == pytest.approx(1 / 3, abs=1e-12)
    assert np.allclose(rep.weights, 1 / 3)


def test_nonsymmetric_matrix_rejected():
    with pytest.raises(ValueError):
        minimize_energy(np.array([[1.0, 2.0], [0.0, 1.0]]), FeasiblePolytope.simplex([0, 1]))


def test_infeasible_polytope_rejected():
    p = build([0, 0.5, 1], FunctionFamily.monomial(1), [1, 2])
    with pytest.raises(InfeasibleError):
        minimize_energy(np.eye(3), p)


def test_symmetric_constraint_is_inactive():
    x = np.linspace(-1, 1, 2000)
    K = assemble_energy_matrix(Kernel.logarithmic(), x)
    free = minimize_energy(K, FeasiblePolytope.simplex(x))
    pinned = minimize_energy(K, build(x, FunctionFamily.monomial(1), [0.0]))
    assert abs(free.value - math.log(2)) <= 2e-2
    assert pinned.value == pytest.approx(free.value, abs=1e-6)


def test_equilibrium_weights_follow_the_arcsine_shape():
    x = np.linspace(-1, 1, 400)
    rep = minimize_energy(assemble_energy_matrix(Kernel.logarithmic(), x),
                          FeasiblePolytope.simplex(x))
    w = rep.weights
    mid = w[150:250].mean()
    assert w[:20].mean() > mid and w[-20:].mean() > mid
    assert np.allclose(w, w[::-1], atol=1e-7)


@pytest.mark.parametrize("seed", range(25))
def test_small_instances_match_independent_oracles(seed):
    r = np.random.default_rng(seed)
    N = int(r.integers(3, 9))
    A = r.normal(size=(N, N))
    K = A @ A.T / N + 0.1 * np.eye(N)
    x = np.sort(r.uniform(0, 1, N))
    if seed % 2:
        mu = r.dirichlet(np.ones(N))
        p = build(x, FunctionFamily.monomial(1), [float(mu @ x)])
    else:
        p = FeasiblePolytope.simplex(x)
    rep = minimize_energy(K, p)
    assert rep.value == pytest.approx(_slsqp(K, p), abs=1e-4)
    assert rep.duality_gap <= 1e-8 and not rep.local
    # Barycentric sampling of the vertex hull never beats the solver.
    V = np.array([v.weights for v in enumerate_vertices(p)])
    lam = r.dirichlet(np.ones(len(V)), size=5000)
    W = lam @ V
    assert np.einsum("ij,jk,ik->i", W, K, W).min() >= rep.value - 1e-12
    assert kkt_residual(K, p, rep.weights) <= 1e-7


@given(st.integers(0, 10**6))
def test_history_is_nonincreasing(seed):
    r = np.random.default_rng(seed)
    N = 12
    x = np.sort(r.uniform(-1, 1, N))
    K = assemble_energy_matrix(Kernel.logarithmic().nonnegative_on(x), x)
    rep = minimize_energy(K, FeasiblePolytope.simplex(x))
    h = np.array(rep.history)
    assert np.all(np.diff(h) <= 1e-13 * np.maximum(1, np.abs(h[:-1])))


def test_reduce_identity_case():
    f = np.array([[2.0, 1.0], [1.0, 3.0]])
    red = reduce_general(f, np.zeros(2), 1.0)
    assert np.allclose(red.matrix, 0.5 * f + red.K_c)
    assert red.offset == -red.K_c


def test_reduce_linear_objective():
    red = reduce_general(np.zeros((3, 3)), lambda x: x, 1.0, grid=[0, 0.5, 1])
    rep = minimize_energy(red.matrix, FeasiblePolytope.simplex([0, 0.5, 1]))
    assert np.allclose(rep.weights, [1, 0, 0])
    assert red.recover(rep.value) == pytest.approx(0.0, abs=1e-12)


def test_reduce_identity_with_unit_field():
    c = 2.0
    red = reduce_general(np.eye(3), np.ones(3), c)
    rep = minimize_energy(red.matrix, FeasiblePolytope.simplex([0, 1, 2]))
    direct = general_objective(np.eye(3), np.ones(3), c * rep.weights)
    assert red.recover(rep.value) == pytest.approx(direct, rel=1e-12)
    assert direct == pytest.approx(0.5 * 4 / 3 + 2)


def test_reduce_rejects_bad_mass():
    with pytest.raises(ValueError):
        reduce_general(np.eye(2), np.zeros(2), 0.0)


def test_reduction_round_trip_on_random_instances():
    worst = 0.0
    for seed in range(50):
        r = np.random.default_rng(seed)
        N = int(r.integers(2, 15))
        A = r.normal(size=(N, N))
        f = A + A.T
        h = r.normal(size=N)
        c = float(r.uniform(0.1, 5))
        red = reduce_general(f, h, c)
        p = FeasiblePolytope.simplex(np.arange(N, dtype=float))
        mu = minimize_energy(red.matrix, p).weights
        direct = general_objective(f, h, c * mu)
        via = c * c * float(mu @ red.matrix @ mu) + red.offset
        worst = max(worst, abs(direct - via) / max(1.0, abs(direct)))
    assert worst <= 1e-9


def test_sweep_degenerate_range_is_a_single_solve():
    res = sweep_mass(np.eye(3), np.zeros(3), None, None, (1.0, 1.0), grid=[0, 1, 2])
    assert res.c == 1.0 and len(res.evaluations) == 1
    assert res.objective == pytest.approx(0.5 / 3)


def test_sweep_mass_only_prefers_smallest_mass():
    res = sweep_mass(np.eye(3), np.zeros(3), None, None, (0.5, 2.0), steps=11, grid=[0, 1, 2])
    assert res.c == 0.5


def _dense_oracle(f, h, cs):
    """Per-c QP by SLSQP on the simplex; returns the best (c, value)."""
    N = f.shape[0]
    vals = []
    for c in cs:
        obj = lambda mu, c=c: 0.5 * c * c * mu @ f @ mu + c * h @ mu  # noqa: E731
        res = minimize(obj, np.full(N, 1 / N), bounds=[(0, None)] * N, method="SLSQP",
                       constraints=[{"type": "eq", "fun": lambda mu: mu.sum() - 1}],
                       options={"ftol": 1e-14})
        vals.append(res.fun)
    k = int(np.argmin(vals))
    return cs[k], vals[k]


def test_sweep_interior_optimum_matches_dense_grid():
    f = np.array([[2.0, 0.5, 0.0, 0.0], [0.5, 2.0, 0.5, 0.0], [0.0, 0.5, 2.0, 0.5],
                  [0.0, 0.0, 0.5, 2.0]])
    h = np.array([-1.0, -0.8, -1.2, -0.5])
    res = sweep_mass(f, h, None, None, (0.5, 4.0), steps=21, grid=np.arange(4.0),
                     golden_iters=30)
    c_ref, v_ref = _dense_oracle(f, h, np.linspace(0.5, 4.0, 1000))
    assert 0.5 < res.c < 4.0
    assert res.objective == pytest.approx(v_ref, abs=1e-4)
    assert res.c == pytest.approx(c_ref, abs=1e-2)


def test_sweep_all_infeasible_lists_certificates():
    F = np.array([[0.0, 1.0]])
    with pytest.raises(InfeasibleError) as e:
        sweep_mass(np.eye(2), np.zeros(2), F, [5.0], (0.5, 1.0), steps=3, grid=[0.0, 1.0])
    assert len(e.value.certificate) == 3
