import numpy as np
import pytest

from potqp.cutting_plane import (CONVERGED_NONNEG, CONVERGED_ZERO, INNER_INFEASIBLE, MAX_ITER,
                                 all_constraints_solve, run_equality, run_inequality,
                                 write_trace_csv)
from potqp.energy_qp import minimize_energy
from potqp.kernel import Kernel, assemble_energy_matrix
from potqp.polytope import FeasiblePolytope, GEQ

LOG = Kernel.logarithmic()
X01 = np.linspace(0, 1, 60)
X11 = np.linspace(-1, 1, 400)
ONE = lambda x, z: np.ones_like(x)  # noqa: E731
LAPLACE = lambda x, z: np.exp(-z * x)  # noqa: E731
MONO = lambda x, z: x ** z  # noqa: E731
G_MONO = {0.0: 1.0, 1.0: 0.3, 2.0: 0.3}


def _no_duplicates(z_set):
    keys = [tuple(np.atleast_1d(z)) for z in z_set]
    return len(keys) == len(set(keys))


def test_redundant_constraint_stops_after_first_solve():
    res = run_equality(LOG, X01, ONE, lambda z: 1.0, np.linspace(0, 1, 5))
    assert res.status == CONVERGED_ZERO and len(res.trace.records) == 1
    free = minimize_energy(assemble_energy_matrix(LOG, X01), FeasiblePolytope.simplex(X01))
    assert res.trace.records[0].energy == pytest.approx(free.value, abs=1e-10)


def test_infeasible_targets_stop_at_first_iteration():
    res = run_equality(LOG, X01, LAPLACE, lambda z: 2.0, np.linspace(0, 4, 20))
    assert res.status == INNER_INFEASIBLE
    assert res.trace.records == [] and res.measure is None
    assert "may still be feasible" in res.trace.message


def test_vacuous_inequalities():
    res = run_inequality(LOG, X01, LAPLACE, lambda z: 0.0, np.linspace(0, 4, 20))
    assert res.status == CONVERGED_NONNEG and len(res.trace.records) == 1


def test_inequality_monomial_sections_match_oracle():
    Z = np.array([0.0, 1.0, 2.0])
    g = G_MONO.__getitem__
    res = run_inequality(LOG, X11, MONO, lambda z: g(float(z)), Z, tol_psi=1e-8)
    assert res.status == CONVERGED_NONNEG
    w = res.weights
    for z in Z:
        assert float(w @ X11 ** z) >= G_MONO[z] - 1e-8
    ref = all_constraints_solve(LOG, X11, MONO, lambda z: g(float(z)), Z, sense=GEQ)
    assert res.report.value == pytest.approx(ref.value, abs=1e-7)
    assert res.trace.monotone() and _no_duplicates(res.trace.z_set)


def test_zero_outer_rounds_records_initial_solve():
    res = run_equality(LOG, X01, LAPLACE, lambda z: (1 - np.exp(-z)) / z if z else 1.0,
                       np.linspace(0, 4, 50), max_outer=0)
    assert res.status == MAX_ITER and len(res.trace.records) == 1


@pytest.mark.parametrize("mass", [0.3, 0.5, 0.7])
def test_equality_invariants_on_point_mass_transforms(mass):
    """Targets are Laplace transforms of a two-atom law on the grid, so the
    continuous constraints are exactly attainable."""
    X = np.linspace(0, 1, 41)
    a, b = X[8], X[30]
    g = lambda z: mass * np.exp(-z * a) + (1 - mass) * np.exp(-z * b)  # noqa: E731
    Z = np.linspace(0, 5, 60)
    res = run_equality(LOG, X, LAPLACE, g, Z, tol_psi=1e-7, max_outer=40)
    tr = res.trace
    assert tr.monotone(1e-10)
    assert _no_duplicates(tr.z_set)
    assert res.status == CONVERGED_ZERO
    psi = np.array([res.weights @ LAPLACE(X, z) - g(z) for z in Z])
    assert np.abs(psi).max() <= 1e-7


def test_trace_csv(tmp_path):
    res = run_equality(LOG, X01, LAPLACE, lambda z: (1 - np.exp(-z)) / z if z else 1.0,
                       np.linspace(0, 4, 50), max_outer=2)
    write_trace_csv(tmp_path / "t.csv", res.trace)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iter,n_constraints,energy,psi_min,psi_max,psi_supnorm"
    assert len(lines) == len(res.trace.records) + 1
