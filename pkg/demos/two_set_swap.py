"""Swapping sup and inf between two different moment sets.

Side A holds the probability measures on [0, 1] with the first two moments of
the uniform law; side B holds those with the uniform law's Laplace transform
at 1. Both orders of optimization of the mutual logarithmic energy are
computed independently and agree.

Run: python3 demos/two_set_swap.py
"""
import math

import numpy as np

from potqp import FunctionFamily, Kernel, build
from potqp.verify import two_set_swap_check


def main():
    x = np.linspace(0, 1, 100)
    side_a = build(x, FunctionFamily.monomial(2), [1 / 2, 1 / 3])
    side_b = build(x, FunctionFamily.exponential([0, 1]), [1 - math.exp(-1)])
    rep = two_set_swap_check(Kernel.logarithmic(), side_a, side_b)
    print(rep.to_text())
    w = rep.mu
    print(f"optimal side-A measure: {np.count_nonzero(w)} atoms, mean {w @ x:.6f}, "
          f"second moment {w @ x**2:.6f}")


if __name__ == "__main__":
    main()
