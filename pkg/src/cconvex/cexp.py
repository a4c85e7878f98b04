"""Twist inversion: momenta, c-exponentials by Newton, c-segments, coordinate images, dilations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL, Tolerances, rng
from .cost import CostModel
from .errors import NoConvergence, OutsideDomain
from .geometry import Polytope, centroid, convex_hull, faces
from .reports import FAIL, PASS, ConditionReport

SIDES = ("source", "target")


def _side(side: str) -> str:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    return side


def momentum(c: CostModel, anchor, point, side: str, check: bool = True):
    """Momentum of ``point`` seen from ``anchor``.

    side="target": point is xbar, anchor is x, result -Dc(x, xbar).
    side="source": point is x, anchor is xbar, result -Dbar c(x, xbar).
    """
    if _side(side) == "target":
        return c.target_momentum(anchor, point, check)
    return c.source_momentum(point, anchor, check)


@dataclass(frozen=True)
class Momentum:
    base: np.ndarray
    covector: np.ndarray
    side: str

    @classmethod
    def of(cls, c: CostModel, x, xbar, side: str) -> "Momentum":
        """p_(x,xbar) based at xbar (side="source") or pbar_(x,xbar) based at x (side="target")."""
        x = np.asarray(x, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        if _side(side) == "source":
            return cls(xbar, c.source_momentum(x, xbar), side)
        return cls(x, c.target_momentum(x, xbar), side)


# ---------------------------------------------------------------------- Newton core


def _residual(c, anchor, Y, P, side):
    return momentum(c, anchor, Y, side, check=False) - P


def _jacobian(c, anchor, Y, side):
    if side == "target":
        return c.cross_many(anchor[None, :], Y)
    return np.transpose(c.cross_many(Y, anchor[None, :]), (0, 2, 1))


def _admissible(c, anchor, Y):
    ok = np.all(np.isfinite(Y), axis=1)
    if c.kind in ("power", "inverse_square"):
        r = np.linalg.norm(Y - anchor, axis=1)
        ok &= r > 0.5 * c.singular_separation
    return ok


def _newton(c, anchor, P, side, Y0, tol, max_iter):
    """Batched damped Newton with backtracking. Returns (Y, residual norms)."""
    Y = Y0.copy()
    F = _residual(c, anchor, Y, P, side)
    nF = np.linalg.norm(F, axis=1)
    for _ in range(max_iter):
        todo = nF > tol
        if not np.any(todo):
            break
        idx = np.flatnonzero(todo)
        J = _jacobian(c, anchor, Y[idx], side)
        try:
            step = -np.linalg.solve(J, F[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        alpha = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        newY = Y[idx].copy()
        newF = F[idx].copy()
        newN = nF[idx].copy()
        for _ in range(40):
            if not np.any(pending):
                break
            k = np.flatnonzero(pending)
            trial = Y[idx[k]] + alpha[k, None] * step[k]
            good = _admissible(c, anchor, trial)
            Ft = np.full_like(trial, np.inf)
            if np.any(good):
                Ft[good] = _residual(c, anchor, trial[good], P[idx[k[good]]], side)
            nt = np.linalg.norm(Ft, axis=1)
            acc = good & (nt < (1 - 1e-4 * alpha[k]) * nF[idx[k]])
            newY[k[acc]] = trial[acc]
            newF[k[acc]] = Ft[acc]
            newN[k[acc]] = nt[acc]
            pending[k[acc]] = False
            alpha[k[~acc]] *= 0.5
        Y[idx], F[idx], nF[idx] = newY, newF, newN
        if np.all(pending):
            break
    # one polishing step where it still helps
    J = _jacobian(c, anchor, Y, side)
    try:
        step = -np.linalg.solve(J, F[..., None])[..., 0]
        trial = Y + step
        good = _admissible(c, anchor, trial)
        if np.any(good):
            Ft = _residual(c, anchor, trial[good], P[good], side)
            nt = np.linalg.norm(Ft, axis=1)
            better = nt < nF[good]
            gi = np.flatnonzero(good)[better]
            Y[gi], nF[gi] = trial[good][better], nt[better]
    except np.linalg.LinAlgError:
        pass
    return Y, nF


def _initial_guess(c, anchor, P, side):
    """Euclidean analogue for the flat kinds; the opposite box center for the curved ones."""
    if c.kind == "bilinear":
        return P.copy()
    if c.kind == "quadratic":
        return anchor + P if side == "target" else anchor - P
    box = c.omega_bar if side == "target" else c.omega
    return np.broadcast_to(box.mean(axis=1), P.shape).copy()


def _continuation(c, anchor, p, side, tol: Tolerances):
    """Track the momentum segment from the opposite box center to p, halving the step on failure."""
    box = c.omega_bar if side == "target" else c.omega
    y_c = box.mean(axis=1)
    p_c = momentum(c, anchor, y_c, side, check=False)
    for r in range(1, tol.newton_retries + 1):
        k = 2**r
        y = y_c.copy()
        ok = True
        for s in np.linspace(0.0, 1.0, k + 1)[1:]:
            ps = ((1 - s) * p_c + s * p)[None, :]
            Y, nF = _newton(c, anchor, ps, side, y[None, :], tol.newton_residual, tol.newton_max_iter)
            if not nF[0] <= tol.newton_residual:
                ok = False
                break
            y = Y[0]
        if ok:
            return y
    raise NoConvergence(f"c-exponential did not converge for momentum {p}")


def cexp_many(c: CostModel, anchor, momenta, side: str, check_domain: bool = True,
              tol: Tolerances = DEFAULT_TOL, guess=None) -> np.ndarray:
    """Vectorised c-exponential: the points whose momenta from ``anchor`` equal ``momenta``.

    ``guess`` optionally replaces the default Newton starting points (warm start).
    """
    _side(side)
    anchor = np.asarray(anchor, dtype=float)
    P = np.atleast_2d(np.asarray(momenta, dtype=float))
    Y0 = _initial_guess(c, anchor, P, side) if guess is None else np.broadcast_to(guess, P.shape).copy()
    Y, nF = _newton(c, anchor, P, side, Y0, tol.newton_residual, tol.newton_max_iter)
    if guess is not None:
        miss = ~(nF <= tol.newton_residual)
        if np.any(miss):
            Y[miss], nF[miss] = _newton(c, anchor, P[miss], side, _initial_guess(c, anchor, P[miss], side),
                                        tol.newton_residual, tol.newton_max_iter)
    for i in np.flatnonzero(~(nF <= tol.newton_residual)):
        Y[i] = _continuation(c, anchor, P[i], side, tol)
    if check_domain:
        box = c.omega_bar if side == "target" else c.omega
        viol = np.max(np.maximum(0.0, np.maximum(box[:, 0] - Y, Y - box[:, 1])), axis=1)
        if np.any(viol > tol.outside):
            i = int(np.argmax(viol))
            raise OutsideDomain(f"c-exponential lands outside its box by {viol[i]:.3g} at {Y[i]}")
    return Y


def cexp(c: CostModel, anchor, momentum_, side: str, check_domain: bool = True,
         tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """c-exponential: the unique point of the opposite box whose momentum from ``anchor`` is given."""
    return cexp_many(c, anchor, np.asarray(momentum_, dtype=float)[None, :], side, check_domain, tol)[0]


# ---------------------------------------------------------------------- c-segments


@dataclass(frozen=True, eq=False)
class CSegment:
    """t -> cexp(anchor, (1-t) p_start + t p_end)."""

    cost: CostModel
    anchor: np.ndarray
    side: str
    p_start: np.ndarray
    p_end: np.ndarray

    def momentum(self, t):
        t = np.asarray(t, dtype=float)
        return (1 - t)[..., None] * self.p_start + t[..., None] * self.p_end

    def __call__(self, t, check_domain: bool = True):
        scalar = np.ndim(t) == 0
        pts = cexp_many(self.cost, self.anchor, self.momentum(np.atleast_1d(t)), self.side, check_domain)
        return pts[0] if scalar else pts


def c_segment(c: CostModel, anchor, side: str, start, end) -> CSegment:
    """c-segment through ``start`` and ``end`` taken with respect to ``anchor``."""
    anchor = np.asarray(anchor, dtype=float)
    return CSegment(c, anchor, _side(side), momentum(c, anchor, start, side), momentum(c, anchor, end, side))


def eval_segment(seg: CSegment, t, check_domain: bool = True):
    return seg(t, check_domain)


# ---------------------------------------------------------------------- coordinate images


@dataclass(frozen=True)
class CoordImage:
    points: np.ndarray
    hull: Polytope | None
    defect: float


def coord_image(c: CostModel, A, anchor, side: str = "source"):
    """Momenta of the points of A seen from ``anchor``.

    side="source": A lies in omega and anchor in omega_bar (p-coordinates);
    side="target": A lies in omega_bar and anchor in omega.
    Point arrays map to arrays. Polytopes map to a :class:`CoordImage` holding the
    hull of the vertex images and the largest distance by which an image of an
    edge midpoint lies outside that hull.
    """
    anchor = np.asarray(anchor, dtype=float)
    if isinstance(A, Polytope):
        img = momentum(c, anchor, A.vertices, side)
        hull = convex_hull(img)
        defect = 0.0
        if A.affine_dim >= 1:
            for vidx, _ in faces(A, max_codim=A.dim):
                if len(vidx) != 2:
                    continue
                mid = A.vertices[vidx].mean(axis=0)
                q = momentum(c, anchor, mid, side)
                defect = max(defect, hull.max_violation(q))
        return CoordImage(img, hull, float(defect))
    return momentum(c, anchor, np.asarray(A, dtype=float), side)


def dilate(c: CostModel, A, kappa: float, anchor, side: str = "source", check_domain: bool = True):
    """Dilation by kappa with respect to ``anchor``: cexp(p_cm + kappa (coord(A) - p_cm)).

    For a polytope the dilated vertex set is returned (the image of a c-convex
    polytope is the hull of its vertex images); point arrays map pointwise with
    p_cm the vertex mean of their images.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    anchor = np.asarray(anchor, dtype=float)
    if isinstance(A, Polytope):
        ci = coord_image(c, A, anchor, side)
        P = ci.points
        pcm = centroid(ci.hull)
    else:
        P = momentum(c, anchor, np.asarray(A, dtype=float), side)
        pcm = P.mean(axis=0)
    return cexp_many(c, anchor, pcm + kappa * (P - pcm), side, check_domain)


# ---------------------------------------------------------------------- c-convexity of sets


def check_cconvex(c: CostModel, A: Polytope, anchors, side: str = "source", n_t: int = 11,
                  max_pairs: int = 200, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> ConditionReport:
    """Sample c-segments between vertices of A (taken w.r.t. each anchor) and test they stay in A."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    V = A.vertices
    pairs = [(i, j) for i in range(len(V)) for j in range(i + 1, len(V))]
    if len(pairs) > max_pairs:
        gen = rng(seed, 1)
        pick = np.sort(gen.choice(len(pairs), max_pairs, replace=False))
        pairs = [pairs[k] for k in pick]
    ts = np.linspace(0.0, 1.0, n_t)
    worst = (-np.inf, None)
    count = 0
    for a in anchors:
        for i, j in pairs:
            seg = c_segment(c, a, side, V[i], V[j])
            try:
                pts = seg(ts, check_domain=False)
                viol = np.array([A.max_violation(q) for q in pts])
            except (NoConvergence, OutsideDomain):
                viol = np.full(n_t, np.inf)
            count += n_t
            k = int(np.argmax(viol))
            if viol[k] > worst[0]:
                worst = (float(viol[k]), {"anchor": a, "pair": [V[i], V[j]], "t": float(ts[k]),
                                          "violation": float(viol[k])})
    return ConditionReport(
        name="c-convex set",
        verdict=PASS if worst[0] <= tol.inclusion else FAIL,
        extremal=float(worst[0]),
        witness=worst[1] or {},
        n_samples=count,
        seed=seed,
        tol=tol.inclusion,
    )
