import numpy as np
import pytest
from scipy.optimize import linprog

from potqp.family import FunctionFamily
from potqp.polytope import (FeasiblePolytope, InfeasibleError, build, check_feasible,
                            columns_independent, enumerate_vertices, feasibility_margin,
                            lp_optimize, restrict)

HALF = build([0, 0.5, 1], FunctionFamily.monomial(1), [1, 0.5])


def _random_instance(seed, sense="eq"):
    r = np.random.default_rng(seed)
    N = int(r.integers(3, 11))
    n_c = int(r.integers(1, 3))
    x = np.sort(r.choice(np.linspace(0, 1, 41), N, replace=False))
    w = r.dirichlet(np.ones(N))
    F = np.vstack([x ** k for k in range(n_c + 1)])
    c = F @ w
    c[0] = 1.0
    if sense == "geq":
        c[1:] -= r.uniform(0, 0.1, n_c)
    return FeasiblePolytope.from_matrix(x, F, c, sense), n_c


def test_build_monomial_one():
    assert np.array_equal(HALF.F, [[1, 1, 1], [0, 0.5, 1]])


def test_build_without_constraints_is_the_simplex():
    assert build([0, 1, 2], None, []).is_simplex


def test_duplicate_row_flagged_redundant():
    p = FeasiblePolytope.from_matrix([0, 0.5, 1], [[1, 1, 1], [0, .5, 1], [0, .5, 1]],
                                     [1, .5, .5])
    assert p.redundant[2] and not p.redundant[0]
    assert check_feasible(p)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        FeasiblePolytope.from_matrix([0, 1], [[1, 1], [np.nan, 1]], [1, 0.5])


def test_feasibility_examples():
    res = check_feasible(FeasiblePolytope.simplex([0.1, 0.7, 0.9]))
    assert res and res.vertex.support == (0,)
    assert check_feasible(HALF)
    bad = build([0, 0.5, 1], FunctionFamily.monomial(1), [1, 2])
    res = check_feasible(bad)
    assert not res
    y = res.certificate.y
    # Farkas: y F <= 0 on every grid column while y c > 0.
    assert np.all(y @ bad.F <= 1e-12) and y @ bad.c > 0


def test_lp_examples():
    v, val = lp_optimize(FeasiblePolytope.simplex([0, 1, 2]), [1, 0, 0], "max")
    assert val == 1 and v.support == (0,)
    v, val = lp_optimize(HALF, [1, 0, 0], "max")
    assert val == pytest.approx(0.5) and np.allclose(v.weights, [0.5, 0, 0.5])
    v, val = lp_optimize(HALF, [1, 0, 0], "min")
    assert val == pytest.approx(0) and np.allclose(v.weights, [0, 1, 0])


def test_lp_on_infeasible_raises_with_certificate():
    bad = build([0, 0.5, 1], FunctionFamily.monomial(1), [1, 2])
    with pytest.raises(InfeasibleError) as e:
        lp_optimize(bad, [1, 0, 0])
    assert e.value.certificate is not None


def test_enumeration_examples():
    verts = enumerate_vertices(HALF)
    assert sorted(tuple(np.round(v.weights, 12)) for v in verts) == [(0, 1, 0), (0.5, 0, 0.5)]
    assert [v.support for v in enumerate_vertices(FeasiblePolytope.simplex([0, 1, 2]))] == \
        [(0,), (1,), (2,)]
    assert len(enumerate_vertices(build([0, 0.5, 1], FunctionFamily.monomial(1), [1, 2]))) == 0


@pytest.mark.parametrize("seed", range(40))
def test_lp_vertex_is_enumerated(seed):
    p, _ = _random_instance(seed, "geq" if seed % 3 == 0 else "eq")
    obj = np.random.default_rng(seed + 1000).normal(size=p.n)
    v, val = lp_optimize(p, obj, "min")
    supports = {u.support for u in enumerate_vertices(p)}
    assert v.support in supports


@pytest.mark.parametrize("seed", range(40))
def test_lp_value_and_duality_match_highs(seed):
    p, _ = _random_instance(seed)
    obj = np.random.default_rng(seed + 2000).normal(size=p.n)
    v, val = lp_optimize(p, obj, "min")
    ref = linprog(obj, A_eq=p.F, b_eq=p.c, bounds=(0, None), method="highs")
    assert val == pytest.approx(ref.fun, abs=1e-9)
    assert float(v.duals @ p.c) == pytest.approx(val, abs=1e-9)
    # Dual feasibility: reduced costs nonnegative.
    assert np.all(obj - v.duals @ p.F >= -1e-9)


def test_restrict_is_a_face():
    face = restrict(HALF, [0, 2])
    assert face.n == 2 and check_feasible(face)
    assert not check_feasible(restrict(HALF, [0]))


def test_margin_sign():
    m_in, _ = feasibility_margin(HALF)
    m_out, _ = feasibility_margin(build([0, 0.5, 1], FunctionFamily.monomial(1), [1, 2]))
    assert m_in > 0 and m_out == pytest.approx(-1.0)


def test_over_constrained_is_flagged():
    p = build([0, 1], FunctionFamily.monomial(2), [0.5, 0.5])
    assert p.over_constrained and check_feasible(p)


def test_vertex_support_and_independence_on_random_instances():
    violations = 0
    for seed in range(100):
        p, n_c = _random_instance(seed)
        for v in enumerate_vertices(p):
            if v.n_atoms > n_c + 1 or not columns_independent(p, v.support):
                violations += 1
    assert violations == 0
