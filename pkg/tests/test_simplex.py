"""Dense simplex against an independent LP solver (HiGHS via scipy)."""
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from potqp.simplex import INFEASIBLE, OPTIMAL, solve_lp


def _bounded_lp(seed, m, n):
    r = np.random.default_rng(seed)
    A = r.normal(size=(m, n))
    A[0] = 1.0  # sum x = b0 keeps the feasible set bounded
    x0 = r.dirichlet(np.ones(n))
    if r.random() < 0.5:
        x0[r.choice(n, size=max(1, n // 2), replace=False)] = 0.0
        x0 /= x0.sum()
    b = A @ x0
    c = r.normal(size=n)
    return c, A, b


@given(seed=st.integers(0, 10**6), m=st.integers(1, 4), n=st.integers(2, 9),
       rule=st.sampled_from(["bland", "dantzig"]))
def test_optimal_value_matches_highs(seed, m, n, rule):
    c, A, b = _bounded_lp(seed, m, n)
    res = solve_lp(c, A, b, rule=rule)
    ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert ref.status == 0
    assert res.status == OPTIMAL
    assert res.value == pytest.approx(ref.fun, abs=1e-8)
    assert np.all(res.x >= -1e-12)
    assert np.allclose(A @ res.x, b, atol=1e-9)


@given(seed=st.integers(0, 10**6), m=st.integers(1, 4), n=st.integers(2, 9))
def test_dual_feasibility_and_strong_duality(seed, m, n):
    c, A, b = _bounded_lp(seed, m, n)
    res = solve_lp(c, A, b)
    y = res.duals
    assert np.all(A.T @ y <= c + 1e-8)
    assert y @ b == pytest.approx(res.value, abs=1e-8)


@given(seed=st.integers(0, 10**6), n=st.integers(2, 8))
def test_infeasible_problems_carry_a_farkas_certificate(seed, n):
    r = np.random.default_rng(seed)
    F = np.vstack([np.ones(n), r.uniform(0, 1, size=n)])
    b = np.array([1.0, 1.5 + r.random()])  # mean above max of the row
    res = solve_lp(np.zeros(n), F, b)
    assert res.status == INFEASIBLE
    y = res.certificate
    assert np.all(y @ F <= 1e-9)
    assert y @ b > 1e-9


def test_beale_cycling_instance_terminates_under_bland():
    # Classical degenerate example on which the textbook largest-coefficient rule cycles.
    c = np.array([0, 0, 0, -0.75, 150, -0.02, 6])
    A = np.array([[1, 0, 0, 0.25, -60, -0.04, 9],
                  [0, 1, 0, 0.5, -90, -0.02, 3],
                  [0, 0, 1, 0, 0, 1, 0]], dtype=float)
    b = np.array([0.0, 0.0, 1.0])
    ref = linprog(c, A_eq=A, b_eq=b, method="highs")
    for rule in ("bland", "dantzig"):
        res = solve_lp(c, A, b, rule=rule)
        assert res.status == OPTIMAL
        assert res.value == pytest.approx(ref.fun, abs=1e-12)


def test_warm_start_after_appending_a_row_matches_cold_solve():
    r = np.random.default_rng(3)
    c, A, b = _bounded_lp(7, 3, 8)
    first = solve_lp(c, A, b)
    # New constraint with its own slack; the old basis plus that slack is dual feasible.
    a = r.normal(size=8)
    A2 = np.zeros((4, 9))
    A2[:3, :8] = A
    A2[3, :8] = a
    A2[3, 8] = 1.0
    b2 = np.append(b, a @ first.x - 0.05)
    c2 = np.append(c, 0.0)
    warm = solve_lp(c2, A2, b2, basis=first.basis + [8])
    cold = solve_lp(c2, A2, b2)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.value == pytest.approx(cold.value, abs=1e-9)


def test_redundant_equality_rows_are_reported():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    res = solve_lp(np.array([1.0, 2.0, 3.0]), A, np.array([1.0, 2.0]))
    assert res.status == OPTIMAL
    assert res.value == pytest.approx(1.0)
    assert res.redundant_rows
