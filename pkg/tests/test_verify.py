import numpy as np
import pytest

from potqp.family import FunctionFamily
from potqp.kernel import Kernel, assemble_energy_matrix
from potqp.measure import DiscreteMeasure
from potqp.polytope import FeasiblePolytope, InfeasibleError, build, lp_optimize
from potqp.verify import equality_chain_report, frostman_check, two_set_swap_check

S3 = FeasiblePolytope.simplex([0.0, 1.0, 2.0])
VIOLATOR = np.array([[1.0, 0.0, 5.0], [0.0, 1.0, 0.0], [5.0, 0.0, 1.0]])


def test_frostman_single_atom():
    x = np.linspace(-1, 1, 101)
    r = frostman_check(Kernel.logarithmic(), DiscreteMeasure.dirac(0.0), x)
    assert r.passed and r.margin <= 0


def test_frostman_flags_the_constructed_violator():
    k = Kernel.tabulated(VIOLATOR, [0.0, 1.0, 2.0])
    r = frostman_check(k, DiscreteMeasure.dirac(0.0), [0.0, 1.0, 2.0])
    # Direct evaluation: U(0) = 1, U(1) = 0, U(2) = 5; probe 2 is off the support.
    assert r.sup_on_support == 1.0 and r.sup_global == 5.0
    assert r.margin == 4.0 and not r.passed
    assert "result = fail" in r.to_text()


def test_frostman_dimension_mismatch():
    with pytest.raises(ValueError):
        frostman_check(Kernel.logarithmic(), DiscreteMeasure.dirac((0, 0)), [0.0, 1.0])


def test_chain_single_point():
    p = FeasiblePolytope.simplex([0.0])
    r = equality_chain_report(np.array([[2.0]]), p, 3)
    assert r.w == r.q == 2.0
    assert all(v == 2.0 for v in r.sequence.values.values())
    assert r.deltas == {"w_q": 0.0, "M_w": 0.0}


def test_chain_identity_exact():
    r = equality_chain_report(np.eye(3), S3, 3, mode="exact")
    assert r.w == pytest.approx(1 / 3, abs=1e-12) and r.q == pytest.approx(1 / 3, abs=1e-12)
    assert r.sequence.values[3] == pytest.approx(1 / 3, abs=1e-12)
    assert r.one_sided_ok and r.sequence.defect == 0.0
    assert "hypotheses not verified" in r.to_text()


def test_chain_log_grid_heuristic():
    x = np.linspace(-1, 1, 200)
    r = equality_chain_report(Kernel.logarithmic(), FeasiblePolytope.simplex(x), 8,
                              mode="heuristic", budget=500)
    assert r.deltas["w_q"] <= 1e-3 and r.one_sided_ok
    assert r.mode == "heuristic" and r.resolution == (200, 8)


def test_swap_identity():
    r = two_set_swap_check(np.eye(3), S3, S3)
    assert r.lhs == pytest.approx(1 / 3, abs=1e-12) and r.rhs == pytest.approx(1 / 3, abs=1e-12)
    assert r.gap <= 1e-12 and r.one_sided_ok


def test_swap_with_pinned_adversary():
    x = np.linspace(0, 1, 21)
    y = x[7]
    pB = build(x, FunctionFamily.monomial(2), [y, y * y])  # zero variance: nu = delta_y
    pA = build(x, FunctionFamily.monomial(1), [0.4])
    K = assemble_energy_matrix(Kernel.logarithmic(), x)
    r = two_set_swap_check(K, pA, pB)
    # Both sides collapse to max over A of the potential of delta_y.
    _, ref = lp_optimize(pA, K.entries[:, 7], "max")
    assert r.lhs == pytest.approx(ref, abs=1e-9) and r.rhs == pytest.approx(ref, abs=1e-9)
    assert r.one_sided_ok


def test_swap_infeasible_side():
    x = np.linspace(0, 1, 10)
    bad = build(x, FunctionFamily.monomial(1), [2.0])
    with pytest.raises(InfeasibleError):
        two_set_swap_check(np.eye(10), FeasiblePolytope.simplex(x), bad)


@pytest.mark.parametrize("seed", range(10))
def test_swap_one_sided_on_random_instances(seed):
    r = np.random.default_rng(seed)
    xa, xb = np.sort(r.uniform(0, 1, 12)), np.sort(r.uniform(0, 1, 9))
    pA = build(xa, FunctionFamily.monomial(1), [float(r.dirichlet(np.ones(12)) @ xa)])
    pB = build(xb, FunctionFamily.monomial(1), [float(r.dirichlet(np.ones(9)) @ xb)])
    K = r.uniform(0, 1, (12, 9))
    rep = two_set_swap_check(K, pA, pB)
    assert rep.lhs <= rep.rhs + 1e-9
