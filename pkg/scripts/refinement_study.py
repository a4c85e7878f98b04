"""Max cell diameter and cell-to-atom bijection over a doubling sequence of atom counts.

This is an empirical proxy only: semidiscrete targets do not satisfy the density
hypothesis of the continuum regularity statement.
"""

from __future__ import annotations

import argparse

from cconvex.cost import CostModel
from cconvex.solver import SourceMeasure, regularity_refinement_study

BOX = [[-0.25, 1.25]] * 2
CASES = {
    "quadratic": (CostModel.make("quadratic", 2, omega=BOX, omega_bar=BOX), [[0.05, 0.95]] * 2),
    "inverse_square": (CostModel.make("inverse_square", 2, omega=BOX, omega_bar=[[3.0, 4.0]] * 2),
                       [[3.05, 3.95]] * 2),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--Ns", type=int, nargs="+", default=[1, 4, 16, 64, 256])
    ap.add_argument("--resolution", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    mu = SourceMeasure.uniform([[0.0, 1.0], [0.0, 1.0]], args.resolution)
    print("cost,N,max_diameter,bijective,boundary_fraction,iterations")
    for name, (c, target) in CASES.items():
        rep = regularity_refinement_study(c, mu, target, args.Ns, args.seed)
        for row in zip(rep.Ns, rep.max_diameter, rep.bijective, rep.boundary_fraction, rep.iterations):
            print(f"{name},{row[0]},{row[1]:.6f},{row[2]},{row[3]:.3g},{row[4]}")


if __name__ == "__main__":
    main()
