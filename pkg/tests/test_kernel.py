import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from potqp.kernel import (Kernel, assemble_energy_matrix, carleson_admissible, eval_kernel,
                          min_spacing)

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_log_kernel_value():
    assert eval_kernel(Kernel.logarithmic(), 0.0, 0.5) == pytest.approx(math.log(2), abs=1e-15)


def test_riesz_kernel_value():
    assert eval_kernel(Kernel.riesz(1), (0, 0), (3, 4)) == pytest.approx(0.2, abs=1e-15)


def test_infinite_diagonal_policy():
    assert eval_kernel(Kernel.logarithmic(diagonal="infinite"), 0.3, 0.3) == math.inf


def test_dimension_mismatch_is_an_input_error():
    with pytest.raises(ValueError):
        eval_kernel(Kernel.logarithmic(), (0, 0), (1, 1, 1))


def test_assembled_log_matrix_on_three_points():
    K = assemble_energy_matrix(Kernel.logarithmic(), [0, 0.5, 1], epsilon=0.25)
    assert np.allclose(np.diag(K.entries), math.log(4))
    assert K.entries[0, 1] == pytest.approx(math.log(2))
    assert K.regularization == 0.25


def test_one_point_riesz_matrix():
    K = assemble_energy_matrix(Kernel.riesz(1), [0.0], epsilon=0.1)
    assert K.entries.shape == (1, 1)
    assert K.entries[0, 0] == pytest.approx(10.0)


def test_tabulated_kernel_round_trips():
    g = np.array([0.0, 1.0, 2.0, 5.0])
    M = np.array([[2, 1, 0, 3], [1, 4, 1, 0], [0, 1, 1, 2], [3, 0, 2, 7]], dtype=float)
    K = assemble_energy_matrix(Kernel.tabulated(M, g), g)
    assert np.array_equal(K.entries, M)


def test_default_epsilon_is_half_the_spacing():
    g = np.linspace(0, 1, 11)
    K = assemble_energy_matrix(Kernel.logarithmic(), g)
    assert K.regularization == pytest.approx(0.05)
    assert K.entries[0, 0] == pytest.approx(-math.log(0.05))


def test_duplicate_points_and_infinite_diagonal_are_rejected():
    with pytest.raises(ValueError):
        assemble_energy_matrix(Kernel.logarithmic(), [0.0, 0.5, 0.5])
    with pytest.raises(ValueError):
        assemble_energy_matrix(Kernel.logarithmic(diagonal="infinite"), [0.0, 1.0])


def test_invalid_kernels():
    with pytest.raises(ValueError):
        Kernel.riesz(0)
    with pytest.raises(ValueError):
        Kernel.carleson(lambda t: -t, 2)  # decreasing profile
    with pytest.raises(ValueError):
        Kernel.tabulated([[1, 2], [0, 1]], [0, 1])  # not symmetric


def test_carleson_log_plane_integral():
    res = carleson_admissible(Kernel.logarithmic(), 2, 1.0)
    assert res.admissible
    # Independent oracle: scipy quadrature of r log(1/r), closed form 1/4.
    ref, _ = integrate.quad(lambda r: -r * math.log(r), 0, 1)
    assert res.estimate == pytest.approx(ref, rel=1e-6)
    assert res.estimate == pytest.approx(0.25, rel=1e-6)


def test_carleson_divergent_riesz():
    assert not carleson_admissible(Kernel.riesz(3), 2, 1.0)


def test_carleson_riesz_one_plane():
    res = carleson_admissible(Kernel.riesz(1), 2, 1.0)
    assert res.admissible and res.estimate == pytest.approx(1.0, rel=1e-6)


def test_carleson_rejects_tabulated():
    with pytest.raises(NotImplementedError):
        carleson_admissible(Kernel.tabulated([[1.0]], [0.0]), 1)


def test_carleson_kernel_composes_profile_with_fundamental_solution():
    k = Kernel.carleson(lambda t: np.maximum(t, 0) ** 2, 2)
    assert eval_kernel(k, (0, 0), (0.5, 0)) == pytest.approx(math.log(2) ** 2)


@given(st.lists(st.tuples(coords, coords), min_size=2, max_size=2),
       st.sampled_from(["log", "riesz", "newton"]))
def test_symmetry_is_exact(pts, kind):
    (x, y) = pts
    k = {"log": Kernel.logarithmic(), "riesz": Kernel.riesz(0.7),
         "newton": Kernel.newtonian(3)}[kind].with_epsilon(0.01)
    assert eval_kernel(k, x, y) == eval_kernel(k, y, x)


@given(st.integers(0, 10**6), st.integers(2, 30))
def test_off_diagonal_entries_are_exact_evaluations(seed, n):
    g = np.random.default_rng(seed).uniform(-2, 2, size=(n, 2))
    k = Kernel.riesz(1.5)
    K = assemble_energy_matrix(k, g)
    i, j = np.triu_indices(n, 1)
    for a, b in zip(i[:20], j[:20]):
        assert K.entries[a, b] == eval_kernel(k, g[a], g[b])
        assert K.entries[b, a] == K.entries[a, b]


@given(st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_smaller_epsilon_never_lowers_the_diagonal(e1, e2):
    lo, hi = sorted((e1, e2))
    g = [0.0, 3.0]
    for k in (Kernel.logarithmic(), Kernel.riesz(1)):
        assert (assemble_energy_matrix(k, g, lo).entries[0, 0]
                >= assemble_energy_matrix(k, g, hi).entries[0, 0])


def test_shift_makes_log_kernel_nonnegative_on_wide_box():
    g = np.linspace(-2, 2, 41)
    k = Kernel.logarithmic().nonnegative_on(g)
    K = assemble_energy_matrix(k, g)
    assert K.entries.min() == pytest.approx(0.0, abs=1e-12)
    assert k.shift == pytest.approx(math.log(4))
    assert K.shift == k.shift


def test_min_spacing():
    assert min_spacing([0.0, 0.3, 1.0]) == pytest.approx(0.3)
    assert min_spacing([[0.0]]) == math.inf
