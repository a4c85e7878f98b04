"""Compute the frozen regression baselines used by the test suite.

Run once after a deliberate numerical change and commit the refreshed
``tests/oracles.json``; tests compare against the frozen file, never against a
value recomputed on the fly.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from cconvex.conditions import check_condition, estimate_fpp_constant, estimate_qconv_M
from cconvex.config import rng
from cconvex.cost import CostModel
from cconvex.estimates import aleksandrov_check, envelope_instance, sharp_growth_check, trapping_basis
from cconvex.geometry import dual_volume_bound, random_polytope
from cconvex.solver import SourceMeasure, regularity_refinement_study

SOLVER_BOX = [[-0.25, 1.25]] * 2


def envelope():
    out = {"sharp_growth": {}, "aleksandrov": {}}
    for res in (32, 64):
        inst = envelope_instance(res)
        out["sharp_growth"][str(res)] = sharp_growth_check(inst.u, inst.m, inst.A, 1.0, inst.grid).c_impl
        out["aleksandrov"][str(res)] = aleksandrov_check(inst.u, inst.m, inst.x0, np.array([1.0, 0.0]),
                                                         inst.grid).c_impl
    return out


def inverse_square(samples: int):
    c = CostModel.make("inverse_square", 2)
    M, _ = estimate_qconv_M(c, samples, 0)
    C, _ = estimate_fpp_constant(c, samples, 0, M_hat=M)
    return {"samples": samples, "M_hat": M, "C_hat": C,
            "A3w_min": check_condition(c, "A3w", 2000, 0).extremal,
            "NNCC_min": check_condition(c, "NNCC", 2000, 0).extremal}


def refinement():
    mu = SourceMeasure.uniform([[0.0, 1.0], [0.0, 1.0]], 64)
    quad = CostModel.make("quadratic", 2, omega=SOLVER_BOX, omega_bar=SOLVER_BOX)
    inv = CostModel.make("inverse_square", 2, omega=SOLVER_BOX, omega_bar=[[3.0, 4.0]] * 2)
    return {
        "quadratic": regularity_refinement_study(quad, mu, [[0.05, 0.95]] * 2, [1, 4, 16, 64]).max_diameter,
        "inverse_square": regularity_refinement_study(inv, mu, [[3.05, 3.95]] * 2, [1, 4, 16, 64]).max_diameter,
    }


def envelopes(n_hulls: int = 200):
    trap, dual = [], []
    for i in range(n_hulls):
        gen = rng(0, 80, i)
        A = random_polytope(gen, 2)
        v = gen.standard_normal(2)
        trap.append(trapping_basis(A, v / np.linalg.norm(v)).report.c_impl)
        if i < 20:
            dual.append(dual_volume_bound(A, np.zeros(2), 1.0).constant)
    return {"trapping_max": max(trap), "dual_volume_max": max(dual), "n_hulls": n_hulls}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "oracles.json"))
    args = ap.parse_args()
    data = {"envelope": envelope(), "inverse_square": inverse_square(500), "refinement": refinement(),
            "envelopes": envelopes()}
    Path(args.out).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(json.dumps(data, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
