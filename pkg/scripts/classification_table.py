"""Verdict table for A3w, A3s, NNCC and the Loeper chain on every built-in cost."""

from __future__ import annotations

import argparse
import csv
import sys

from cconvex.conditions import check_condition, check_glp, estimate_fpp_constant, estimate_qconv_M
from cconvex.cost import CostModel

COSTS = [("bilinear", None), ("quadratic", None), ("power", -1.5), ("power", -1.0), ("power", 0.5),
         ("inverse_square", None)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=2)
    args = ap.parse_args()
    wr = csv.writer(sys.stdout, lineterminator="\n")
    wr.writerow(["cost", "A3w", "A3s", "NNCC", "gLp", "M_hat", "C_hat", "min_normalized_mtw"])
    for kind, p in COSTS:
        c = CostModel.make(kind, args.dim, p=p)
        reps = {k: check_condition(c, k, args.samples, args.seed) for k in ("A3w", "A3s", "NNCC")}
        M, _ = estimate_qconv_M(c, args.samples, args.seed)
        C, _ = estimate_fpp_constant(c, args.samples, args.seed, M_hat=M)
        glp = check_glp(c, args.samples, args.seed)
        wr.writerow([c.label, *(reps[k].verdict for k in ("A3w", "A3s", "NNCC")), glp.verdict,
                     f"{M:.6f}", f"{C:.6g}", f"{reps['NNCC'].extremal + 0.0:.6g}"])


if __name__ == "__main__":
    main()
