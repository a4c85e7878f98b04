"""Curvature conditions: MTW values, A3w/A3s/NNCC verdicts, the Loeper maximum principle,
and the quasiconvexity constants M and C."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .cexp import c_segment, cexp_many
from .config import DEFAULT_TOL, Tolerances, parallel_map, rng
from .cost import CostModel
from .errors import FDUnstable, NoConvergence, OutsideDomain
from .reports import FAIL, INCONCLUSIVE, PASS, ConditionReport

EPS = np.finfo(float).eps
GLP_GRID = 21
FPP_GRID = 201
CHUNK = 100


# ---------------------------------------------------------------------- MTW


@dataclass(frozen=True)
class MTWQuery:
    x: np.ndarray
    xbar: np.ndarray
    V: np.ndarray
    eta: np.ndarray

    @classmethod
    def make(cls, x, xbar, V, eta, orthogonal: bool = True) -> "MTWQuery":
        """Normalised query; with ``orthogonal`` the covector is projected so that <eta, V> = 0."""
        V = np.asarray(V, dtype=float)
        eta = np.asarray(eta, dtype=float)
        V = V / np.linalg.norm(V)
        if orthogonal:
            eta = eta - (eta @ V) * V
        eta = eta / np.linalg.norm(eta)
        return cls(np.asarray(x, dtype=float), np.asarray(xbar, dtype=float), V, eta)


class MTWValue(NamedTuple):
    value: float
    error: float

    def __float__(self):
        return self.value


def _t_step(c: CostModel, x, xbar) -> float:
    E = np.linalg.inv(c.cross_matrix(x, xbar, check=False))
    scale = max(1.0, float(np.linalg.norm(x - xbar)))
    return EPS ** (1 / 6) * scale / np.linalg.norm(E, 2)


def mtw_value(c: CostModel, q: MTWQuery, method: str = "hessian", tol: Tolerances = DEFAULT_TOL) -> MTWValue:
    """-(3/2) d^2/ds^2 d^2/dt^2 c(x + sV, xbar(t)) at s = t = 0,

    with xbar(t) = cexp_x(pbar + t eta) and pbar the momentum of xbar at x.

    ``method="hessian"`` differentiates the analytic x-Hessian V^T D^2_x c V twice in t;
    ``method="nested"`` uses nested central differences in both s and t. Both use
    Richardson extrapolation at steps h and h/2; the returned error is the gap between
    two extrapolations.
    """
    c._check(np.linalg.norm(q.x - q.xbar))
    pbar = c.target_momentum(q.x, q.xbar)
    h = _t_step(c, q.x, q.xbar)
    if method == "hessian":
        ts = np.array([-4, -2, -1, 0, 1, 2, 4], dtype=float) * (h / 2)
        Y = cexp_many(c, q.x, pbar + ts[:, None] * q.eta, "target", check_domain=False, guess=q.xbar)
        H = c.cross_many(q.x[None, :], Y) if c.kind != "bilinear" else np.zeros((len(Y), c.n, c.n))
        if c.kind in ("power", "inverse_square"):
            g = np.einsum("i,kij,j->k", q.V, H, q.V)
        elif c.kind == "quadratic":
            g = np.full(len(Y), q.V @ q.V)
        else:
            g = np.zeros(len(Y))
        d = lambda k: (g[3 + k] - 2 * g[3] + g[3 - k]) / (ts[3 + k] ** 2)
        d1, d2, d4 = d(1), d(2), d(3)
        r1 = (4 * d1 - d2) / 3
        r2 = (4 * d2 - d4) / 3
    elif method == "nested":
        hs = EPS ** (1 / 6) * max(1.0, float(np.linalg.norm(q.x - q.xbar)))
        r1, r2 = _nested(c, q, pbar, hs, h)
    else:
        raise ValueError(f"unknown method {method!r}")
    val = -1.5 * r1
    err = 1.5 * abs(r1 - r2)
    scale = max(1.0, abs(val))
    if err > 10 * tol.a3w * scale * (1e3 if method == "nested" else 1.0):
        raise FDUnstable(f"Richardson estimates disagree by {err:.3g}")
    return MTWValue(float(val), float(err))


def _nested(c, q, pbar, hs, ht):
    def mixed(a, b):
        ss = np.array([-1, 0, 1]) * a
        tt = np.array([-1, 0, 1]) * b
        Y = cexp_many(c, q.x, pbar + tt[:, None] * q.eta, "target", check_domain=False, guess=q.xbar)
        vals = np.array([[float(c.value(q.x + s * q.V, y, check=False)) for y in Y] for s in ss])
        w = np.array([1.0, -2.0, 1.0])
        return w @ vals @ w / (a * a * b * b)

    a, b = 8 * hs, 8 * ht
    m1, m2, m4 = mixed(a, b), mixed(a / 2, b / 2), mixed(a / 4, b / 4)
    return (4 * m2 - m1) / 3, (4 * m4 - m2) / 3


def mtw_scale(c: CostModel, x, xbar) -> float:
    """Natural size of the MTW form at (x, xbar), used to make thresholds dimensionless."""
    if c.kind in ("bilinear", "quadratic"):
        return 1.0
    H = c.hess_x(x, xbar, check=False)
    E = np.linalg.inv(c.cross_matrix(x, xbar, check=False))
    r = float(np.linalg.norm(np.asarray(x) - np.asarray(xbar)))
    return float(np.linalg.norm(H, 2) * np.linalg.norm(E, 2) ** 2 / r**2)


def normalized_mtw(c: CostModel, q: MTWQuery) -> float:
    return mtw_value(c, q).value / (mtw_scale(c, q.x, q.xbar) * (q.V @ q.V) * (q.eta @ q.eta))


def _random_query(c, gen, x, xb, orthogonal):
    V = gen.standard_normal(c.n)
    eta = gen.standard_normal(c.n)
    return MTWQuery.make(x, xb, V, eta, orthogonal)


def _mtw_chunk(args):
    c, kind, seed, idx, k = args
    gen = rng(seed, 10, idx)
    x, xb = c.sample_pairs(gen, k)
    out = []
    for i in range(k):
        q = _random_query(c, gen, x[i], xb[i], kind != "NNCC")
        out.append((normalized_mtw(c, q), q))
    return out


def _refine(c: CostModel, q: MTWQuery, orthogonal: bool, max_iter: int = 150) -> tuple[float, MTWQuery]:
    """Locally minimise the normalised MTW value over the directions (V, eta) at fixed (x, xbar)."""
    n = c.n

    def build(z):
        return MTWQuery.make(q.x, q.xbar, z[:n], z[n:], orthogonal)

    def f(z):
        if np.linalg.norm(z[:n]) < 1e-8 or np.linalg.norm(z[n:] - (z[n:] @ z[:n]) * z[:n] / (z[:n] @ z[:n])) < 1e-8:
            return 1e3
        try:
            return normalized_mtw(c, build(z))
        except FDUnstable:
            return 1e3

    z0 = np.concatenate([q.V, q.eta])
    res = minimize(f, z0, method="Nelder-Mead",
                   options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-12})
    best = build(res.x)
    val = normalized_mtw(c, best)
    return val, best


def check_condition(c: CostModel, kind: str, n_samples: int, seed: int, tol: Tolerances = DEFAULT_TOL,
                    delta: float | None = None, refine: int = 4) -> ConditionReport:
    """Sampled verdict for A3w, A3s or NNCC on the normalised MTW form.

    A3w: min over orthogonal (V, eta) >= -tol.a3w.  A3s: the same minimum >= delta.
    NNCC: min over unconstrained (V, eta) >= -tol.a3w. The ``refine`` worst samples are
    polished by a local minimisation over directions before the verdict.
    """
    if kind not in ("A3w", "A3s", "NNCC"):
        raise ValueError("kind must be A3w, A3s or NNCC")
    if c.n < 2 and kind != "NNCC":
        return ConditionReport(kind, INCONCLUSIVE, float("nan"), {}, 0, seed, 0.0,
                               {"reason": "orthogonal pairs need n >= 2"})
    delta = tol.a3s_delta if delta is None else delta
    jobs = [(c, kind, seed, i, min(CHUNK, n_samples - i * CHUNK)) for i in range((n_samples + CHUNK - 1) // CHUNK)]
    rows = [r for part in parallel_map(_mtw_chunk, jobs) for r in part]
    vals = np.array([r[0] for r in rows])
    order = np.argsort(vals, kind="stable")
    best_val, best_q = float(vals[order[0]]), rows[order[0]][1]
    refined = parallel_map(lambda i: _refine(c, rows[i][1], kind != "NNCC"), list(order[:refine]))
    for val, q in refined:
        if val < best_val:
            best_val, best_q = val, q
    threshold = delta if kind == "A3s" else -tol.a3w
    return ConditionReport(
        name=kind,
        verdict=PASS if best_val >= threshold else FAIL,
        extremal=best_val,
        witness={"x": best_q.x, "xbar": best_q.xbar, "V": best_q.V, "eta": best_q.eta,
                 "raw": mtw_value(c, best_q).value},
        n_samples=n_samples,
        seed=seed,
        tol=float(threshold),
        extra={"sampled_min": float(vals.min()), "sampled_max": float(vals.max())},
    )


# ---------------------------------------------------------------------- segment functions


@dataclass
class SegmentSample:
    """One (x, x0, xbar0, xbar1) configuration evaluated along a c-segment."""

    form: str  # "t": segment of foci w.r.t. x0;  "s": segment of points w.r.t. xbar0
    ts: np.ndarray
    f: np.ndarray
    config: dict


def _segment_values(c: CostModel, form: str, a, a0, b0, b1, ts):
    """Values of the tested function along a c-segment.

    form "t": a = x, a0 = x0, segment xbar(t) from b0 to b1 w.r.t. x0,
              f(t) = -c(x, xbar(t)) + c(x0, xbar(t)).
    form "s": a = xbar, a0 = xbar0, segment x(s) from b0 = x0 to b1 = x1 w.r.t. xbar0,
              f(s) = -c(x(s), xbar) + c(x(s), xbar0).
    Returns None when the segment leaves its box.
    """
    side = "target" if form == "t" else "source"
    seg = c_segment(c, a0, side, b0, b1)
    try:
        pts = seg(ts, check_domain=True)
    except (OutsideDomain, NoConvergence):
        return None
    if form == "t":
        return -c.value(a, pts) + c.value(a0, pts)
    return -c.value(pts, a) + c.value(pts, a0)


def _sample_config(c: CostModel, gen, form: str):
    if form == "t":
        a = c.sample_omega(gen, 2)
        b = c.sample_omega_bar(gen, 2)
    else:
        a = c.sample_omega_bar(gen, 2)
        b = c.sample_omega(gen, 2)
    return a[0], a[1], b[0], b[1]


def _segment_chunk(args):
    c, seed, stream, idx, k, ngrid = args
    gen = rng(seed, stream, idx)
    ts = np.linspace(0.0, 1.0, ngrid)
    out = []
    for i in range(k):
        for form in ("t", "s"):
            a, a0, b0, b1 = _sample_config(c, gen, form)
            f = _segment_values(c, form, a, a0, b0, b1, ts)
            cfg = {"form": form, "point": a, "anchor": a0, "start": b0, "end": b1}
            out.append(None if f is None else SegmentSample(form, ts, f, cfg))
    return out


def segment_samples(c: CostModel, n_samples: int, seed: int, ngrid: int, stream: int = 20):
    """Deterministic sample set of segment functions (both forms per draw); None marks discarded draws."""
    jobs = [(c, seed, stream, i, min(CHUNK, n_samples - i * CHUNK), ngrid)
            for i in range((n_samples + CHUNK - 1) // CHUNK)]
    return [r for part in parallel_map(_segment_chunk, jobs) for r in part]


def check_glp(c: CostModel, n_samples: int, seed: int, tol: Tolerances = DEFAULT_TOL,
              samples=None) -> ConditionReport:
    """Loeper's maximum principle: f(t) <= max(f(0), f(1)) + tol along sampled c-segments."""
    samples = segment_samples(c, n_samples, seed, GLP_GRID) if samples is None else samples
    kept = [s for s in samples if s is not None]
    worst, wit = np.inf, {}
    for s in kept:
        slack = max(s.f[0], s.f[-1]) - s.f
        k = int(np.argmin(slack))
        if slack[k] < worst:
            worst, wit = float(slack[k]), {**s.config, "t": float(s.ts[k]), "slack": float(slack[k])}
    if not kept:
        return ConditionReport("gLp", INCONCLUSIVE, float("nan"), {}, 0, seed, tol.glp,
                               {"discarded": len(samples)})
    return ConditionReport("gLp", PASS if worst >= -tol.glp else FAIL, worst, wit, len(kept), seed, tol.glp,
                           {"discarded": len(samples) - len(kept)})


def estimate_qconv_M(c: CostModel, n_samples: int, seed: int, tol: Tolerances = DEFAULT_TOL,
                     samples=None) -> tuple[float, ConditionReport]:
    """Smallest M with f(t) - f(0) <= M t (f(1) - f(0))_+ over the sample (both forms), clamped at 1."""
    samples = segment_samples(c, n_samples, seed, GLP_GRID) if samples is None else samples
    kept = [s for s in samples if s is not None]
    M, wit = 1.0, {}
    violations = []
    for s in kept:
        lhs = s.f - s.f[0]
        rhs = s.f[-1] - s.f[0]
        t = s.ts[1:]
        if rhs <= tol.qconv:
            bad = lhs[1:] > tol.qconv
            if np.any(bad):
                k = int(np.argmax(lhs[1:]))
                violations.append({**s.config, "t": float(t[k]), "lhs": float(lhs[1 + k]), "rhs_factor": float(rhs)})
            continue
        ratio = lhs[1:] / (t * rhs)
        k = int(np.argmax(ratio))
        if ratio[k] > M:
            M, wit = float(ratio[k]), {**s.config, "t": float(t[k]), "ratio": float(ratio[k])}
    verdict = FAIL if violations else (PASS if kept else INCONCLUSIVE)
    rep = ConditionReport("QConv", verdict, M, wit, len(kept), seed, tol.qconv,
                          {"violations": len(violations), "violation_witnesses": violations[:5],
                           "discarded": len(samples) - len(kept)})
    return M, rep


def estimate_fpp_constant(c: CostModel, n_samples: int, seed: int, tol: Tolerances = DEFAULT_TOL,
                          M_hat: float | None = None, slack: float = 0.05,
                          rel_floor: float = 1e-3) -> tuple[float, ConditionReport]:
    """C_hat = max of (-f'')_+ / |f'| along sampled c-segments on a 201-point grid.

    Grid points where |f'| is below ``max(tol.qconv, rel_floor * max|f'|)`` are skipped:
    there the ratio is dominated by finite-difference noise. When ``M_hat`` is not given
    it is estimated on the identical draws and the report checks M_hat <= e^C_hat (1 + slack).
    """
    samples = segment_samples(c, n_samples, seed, FPP_GRID)
    kept = [s for s in samples if s is not None]
    if M_hat is None:
        coarse = [None if s is None else SegmentSample(s.form, s.ts[::10], s.f[::10], s.config) for s in samples]
        M_hat, _ = estimate_qconv_M(c, n_samples, seed, tol, samples=coarse)
    C, wit = 0.0, {}
    for s in kept:
        h = s.ts[1] - s.ts[0]
        f1 = (s.f[2:] - s.f[:-2]) / (2 * h)
        f2 = (s.f[2:] - 2 * s.f[1:-1] + s.f[:-2]) / h**2
        floor = max(tol.qconv, rel_floor * float(np.max(np.abs(f1))))
        ok = np.abs(f1) > floor
        if not np.any(ok):
            continue
        r = np.where(ok, np.maximum(-f2, 0.0) / np.where(ok, np.abs(f1), 1.0), 0.0)
        k = int(np.argmax(r))
        if r[k] > C:
            C, wit = float(r[k]), {**s.config, "t": float(s.ts[1 + k]), "fpp": float(f2[k]), "fp": float(f1[k])}
    if not np.isfinite(C):
        raise FDUnstable("non-finite second-derivative ratio")
    bound = float(np.exp(C) * (1 + slack))
    ok = M_hat <= bound
    rep = ConditionReport("fpp", PASS if ok else FAIL, C, wit, len(kept), seed, tol.qconv,
                          {"M_hat": float(M_hat), "exp_C": float(np.exp(C)), "bound": bound,
                           "discarded": len(samples) - len(kept)})
    return C, rep
