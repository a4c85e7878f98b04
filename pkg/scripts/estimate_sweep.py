"""Sharp growth and Aleksandrov implied constants over seeded section instances.

Prints one CSV row per report and a per-cost summary on stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from cconvex.conditions import estimate_qconv_M
from cconvex.cost import CostModel
from cconvex.estimates import estimate_sweep, estimates_csv

COSTS = {"quadratic": ("quadratic", None), "bilinear": ("bilinear", None), "power-1": ("power", -1.0),
         "power0.5": ("power", 0.5), "inverse_square": ("inverse_square", None)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--costs", nargs="+", default=list(COSTS), choices=list(COSTS))
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--resolution", type=int, default=32)
    args = ap.parse_args()
    rows = []
    for name in args.costs:
        kind, p = COSTS[name]
        c = CostModel.make(kind, 2, p=p)
        M, _ = estimate_qconv_M(c, 500, args.seed)
        part = estimate_sweep(c, args.instances, args.seed, args.resolution, M_hat=M)
        for est in ("sharp_growth", "aleksandrov"):
            v = np.array([r.c_impl for _, r in part if r.name == est])
            print(f"{c.label:<16} {est:<13} min {v.min():.4g}  median {np.median(v):.4g}  max {v.max():.4g}",
                  file=sys.stderr)
        rows.extend(part)
    sys.stdout.write(estimates_csv(rows))


if __name__ == "__main__":
    main()
