"""Polar dual versus the c-subdifferential of the c-cone at its vertex, on seeded instances."""

from __future__ import annotations

import argparse

from cconvex.cfunc import map_of_cones_check
from cconvex.cost import CostModel

COSTS = [("bilinear", None), ("quadratic", None), ("power", -1.0), ("inverse_square", None)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--resolution", type=int, default=48)
    args = ap.parse_args()
    print("cost,instance,lam,n_polar,n_subdiff,n_diff,n_far")
    for kind, p in COSTS:
        c = CostModel.make(kind, 2, p=p)
        for i in range(args.instances):
            r = map_of_cones_check(c, args.seed, i, args.resolution, args.resolution)
            print(f"{c.label},{i},{r.config['lam']:.6g},{r.n_polar},{r.n_subdiff},{r.n_diff},{r.n_far}")


if __name__ == "__main__":
    main()
