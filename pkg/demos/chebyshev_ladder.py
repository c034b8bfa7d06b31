"""Energy, inf-sup value and the support-restricted sup-inf ladder.

For a convex set of measures the minimal energy w equals the inf-sup value q,
and sup-inf values over measures with at most m atoms climb towards them as m
grows. The first part reproduces this exactly on a three-point toy; the
second shows how slowly the ladder climbs on a 60-point logarithmic grid.

Run: python3 demos/chebyshev_ladder.py
"""
import numpy as np

from potqp import FeasiblePolytope, Kernel, assemble_energy_matrix
from potqp.saddle import HEURISTIC
from potqp.verify import equality_chain_report


def show(rep):
    print(f"  w = {rep.w:.10f}   q = {rep.q:.10f}")
    for m, v in sorted(rep.sequence.values.items()):
        print(f"  qbar_{m:<2d} = {v:.10f}   w - qbar = {rep.w - v:.4f}")
    print(f"  quasi-monotonicity defect {rep.sequence.defect:.1e}")


def main():
    print("identity kernel on three points (exact enumeration):")
    show(equality_chain_report(np.eye(3), FeasiblePolytope.simplex([0.0, 1.0, 2.0]), 3,
                               mode="exact"))
    print("logarithmic kernel, 60 points on [-1, 1] (heuristic search):")
    x = np.linspace(-1, 1, 60)
    K = assemble_energy_matrix(Kernel.logarithmic(), x)
    show(equality_chain_report(K, FeasiblePolytope.simplex(x), 6, mode=HEURISTIC))


if __name__ == "__main__":
    main()
