"""Energy minimization over moment-constrained probability measures on grids.

Kernels and energy matrices live in ``kernel``, measures in ``measure``,
constraint families in ``family`` and the feasible polytope with its LP
oracle in ``polytope``. Solvers: ``energy_qp`` (Frank-Wolfe plus active-set
polish), ``saddle`` (inf-sup / sup-inf values by Kelley's method) and
``cutting_plane`` (constraint generation over a continuum of constraints).
``verify`` holds numerical checks of structural identities.
"""
from .cutting_plane import all_constraints_solve, run_equality, run_inequality
from .energy_qp import (SolveReport, general_objective, minimize_energy, reduce_general,
                        sweep_mass)
from .family import (FunctionFamily, chebyshev_system_check, evaluate_on_grid,
                     exp_curve_feasible, monomial_moment_feasible)
from .kernel import EnergyMatrix, Kernel, assemble_energy_matrix, eval_kernel
from .measure import (DiscreteMeasure, energy, mutual_energy, potential, potentials,
                      read_measure_csv, write_measure_csv)
from .polytope import (EQ, GEQ, FeasiblePolytope, InfeasibleError, build, check_feasible,
                       enumerate_vertices, lp_optimize)
from .saddle import EXACT, HEURISTIC, chebyshev_sequence, dual_q, lower_qbar
from .verify import equality_chain_report, frostman_check, two_set_swap_check

__version__ = "0.1.0"

__all__ = [
    "Kernel", "EnergyMatrix", "assemble_energy_matrix", "eval_kernel",
    "DiscreteMeasure", "potential", "potentials", "mutual_energy", "energy",
    "read_measure_csv", "write_measure_csv",
    "FunctionFamily", "evaluate_on_grid", "chebyshev_system_check",
    "monomial_moment_feasible", "exp_curve_feasible",
    "FeasiblePolytope", "InfeasibleError", "EQ", "GEQ", "build", "check_feasible",
    "lp_optimize", "enumerate_vertices",
    "minimize_energy", "SolveReport", "reduce_general", "general_objective", "sweep_mass",
    "dual_q", "lower_qbar", "chebyshev_sequence", "EXACT", "HEURISTIC",
    "run_equality", "run_inequality", "all_constraints_solve",
    "frostman_check", "equality_chain_report", "two_set_swap_check",
]
