"""Convex geometry on polytopes: hulls, polar duals, John ellipsoids, widths, normal cones."""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .config import DEFAULT_TOL, Tolerances, parallel_map, rng
from .errors import (
    DegenerateBody,
    NoConvergence,
    NonFinite,
    NotAVertex,
    NotExposed,
    NoWitness,
    PointOutside,
    UnboundedDual,
)


# --------------------------------------------------------------------------- types


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope in vertex and halfspace form.

    ``normals`` are unit outward normals and ``offsets`` the matching right-hand
    sides, so the body is ``{p : normals @ p <= offsets}``. Lower-dimensional
    bodies carry extra pairs of opposite rows pinning them to their affine hull
    (``origin + span(basis)``).
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    affine_dim: int
    volume: float
    origin: np.ndarray
    basis: np.ndarray
    flags: tuple = ()

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def full_dimensional(self) -> bool:
        return self.affine_dim == self.dim

    def slack(self, p) -> np.ndarray:
        """offsets - normals @ p for each halfspace (nonnegative inside)."""
        p = np.asarray(p, dtype=float)
        return self.offsets - p @ self.normals.T

    def max_violation(self, p) -> float:
        return float(max(0.0, -np.min(self.slack(p))))

    def contains(self, p, tol: float = DEFAULT_TOL.inclusion) -> bool:
        return self.max_violation(p) <= tol

    def support(self, v) -> float:
        """Support function max over the body of <p, v>."""
        return float(np.max(self.vertices @ np.asarray(v, dtype=float)))

    def incident(self, i: int, tol: float = DEFAULT_TOL.facet) -> np.ndarray:
        """Indices of halfspaces active at vertex ``i``."""
        s = self.slack(self.vertices[i])
        return np.flatnonzero(np.abs(s) <= tol * max(1.0, np.abs(self.offsets).max()))

    def vertex_index(self, p, tol: float = DEFAULT_TOL.facet) -> int:
        d = np.linalg.norm(self.vertices - np.asarray(p, dtype=float), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol * max(1.0, np.abs(self.vertices).max()):
            raise NotAVertex(f"{p} is not a vertex (nearest at distance {d[i]:.3g})")
        return i

    @property
    def centroid(self) -> np.ndarray:
        return centroid(self)

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "dim": int(self.dim)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Polytope":
        verts = np.asarray(d["vertices"], dtype=float).reshape(-1, int(d["dim"]))
        return convex_hull(verts)

    @classmethod
    def from_json(cls, s: str) -> "Polytope":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """{p : (p - center)^T shape (p - center) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.shape, dtype=float)
        if not np.allclose(q, q.T, atol=1e-12, rtol=0):
            raise ValueError("ellipsoid shape must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) <= 0:
            raise ValueError("ellipsoid shape must be positive definite")

    @property
    def dim(self) -> int:
        return len(self.center)

    def support(self, a) -> float:
        a = np.asarray(a, dtype=float)
        return float(a @ self.center + np.sqrt(a @ np.linalg.solve(self.shape, a)))

    def gauge(self, p) -> np.ndarray:
        d = np.atleast_2d(np.asarray(p, dtype=float)) - self.center
        return np.einsum("ij,jk,ik->i", d, self.shape, d)

    def contains(self, p, tol: float = 0.0) -> bool:
        return bool(np.all(self.gauge(p) <= 1.0 + tol))

    def scaled(self, k: float) -> "Ellipsoid":
        """center + k (E - center)."""
        return Ellipsoid(self.center.copy(), self.shape / k**2)

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Semi-axis lengths (descending) and the matching unit directions as columns."""
        w, u = np.linalg.eigh(self.shape)
        lengths = 1.0 / np.sqrt(w)
        order = np.argsort(-lengths, kind="stable")
        return lengths[order], u[:, order]

    @property
    def volume(self) -> float:
        return _unit_ball_volume(self.dim) / np.sqrt(np.linalg.det(self.shape))


@dataclass(frozen=True, eq=False)
class NormalConeGenerators:
    base: np.ndarray
    generators: np.ndarray
    others: np.ndarray = field(repr=False)

    def contains(self, w, tol: float = 1e-9) -> bool:
        """Membership in the normal cone (a conic combination of generators)."""
        w = np.asarray(w, dtype=float)
        _, res = nnls(self.generators.T, w)
        return res <= tol * max(1.0, np.linalg.norm(w))

    def contains_strict(self, w, tol: float = 0.0) -> bool:
        """Strict normal cone: <w, p - base> < 0 for every other vertex p."""
        if len(self.others) == 0:
            return True
        w = np.asarray(w, dtype=float)
        return bool(np.all((self.others - self.base) @ w < -tol))


@dataclass(frozen=True)
class DualVolumeReport:
    dual_volume: float
    volume: float
    constant: float
    center: np.ndarray
    flags: tuple = ()


# --------------------------------------------------------------------------- helpers


def _unit_ball_volume(n: int) -> float:
    from math import gamma, pi

    return pi ** (n / 2) / gamma(n / 2 + 1)


def _affine_frame(points: np.ndarray, tol: float = 1e-10):
    origin = points.mean(axis=0)
    centered = points - origin
    scale = max(1.0, float(np.abs(points).max()))
    if len(points) == 1:
        return origin, np.zeros((points.shape[1], 0)), np.eye(points.shape[1])
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    r = int(np.sum(s > tol * scale * np.sqrt(len(points))))
    basis = vt[:r].T
    comp = null_space(basis.T) if r else np.eye(points.shape[1])
    return origin, basis, comp


def _dedupe_rows(normals: np.ndarray, offsets: np.ndarray, decimals: int = 9):
    key = np.round(np.hstack([normals, offsets[:, None]]), decimals)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx = np.sort(idx)
    return normals[idx], offsets[idx]


def _polygon_order(local: np.ndarray, idx: np.ndarray) -> np.ndarray:
    c = local[idx].mean(axis=0)
    ang = np.arctan2(local[idx, 1] - c[1], local[idx, 0] - c[0])
    return idx[np.argsort(ang, kind="stable")]


# --------------------------------------------------------------------------- hulls


def convex_hull(points) -> Polytope:
    """Convex hull of a finite point set; lower-dimensional sets are handled in their affine hull."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("need at least one point")
    if not np.all(np.isfinite(pts)):
        raise NonFinite("points must be finite")
    n = pts.shape[1]
    pts = np.unique(pts, axis=0)
    origin, basis, comp = _affine_frame(pts)
    d = basis.shape[1]
    local = (pts - origin) @ basis

    if d == 0:
        vidx = np.array([0])
        in_normals = np.zeros((0, n))
        in_offsets = np.zeros(0)
        volume = 0.0
    elif d == 1:
        s = local[:, 0]
        lo, hi = int(np.argmin(s)), int(np.argmax(s))
        vidx = np.array([lo, hi])
        u = basis[:, 0]
        in_normals = np.vstack([-u, u])
        in_offsets = np.array([-(pts[lo] @ u), pts[hi] @ u])
        volume = float(s[hi] - s[lo]) if n == 1 else 0.0
    else:
        hull = ConvexHull(local)
        vidx = _polygon_order(local, hull.vertices) if d == 2 else np.sort(hull.vertices)
        eq = hull.equations
        loc_normals = eq[:, :-1]
        norms = np.linalg.norm(loc_normals, axis=1)
        loc_normals = loc_normals / norms[:, None]
        loc_offsets = -eq[:, -1] / norms
        loc_normals, loc_offsets = _dedupe_rows(loc_normals, loc_offsets)
        in_normals = loc_normals @ basis.T
        in_offsets = loc_offsets + in_normals @ origin
        volume = float(hull.volume) if d == n else 0.0

    # equality rows pinning the body to its affine hull
    pin_normals = np.vstack([comp.T, -comp.T]) if comp.shape[1] else np.zeros((0, n))
    pin_offsets = np.concatenate([comp.T @ origin, -(comp.T @ origin)]) if comp.shape[1] else np.zeros(0)
    normals = np.vstack([in_normals, pin_normals])
    offsets = np.concatenate([in_offsets, pin_offsets])
    return Polytope(
        vertices=pts[vidx].copy(),
        normals=normals,
        offsets=offsets,
        affine_dim=d,
        volume=volume,
        origin=origin,
        basis=basis,
    )


def from_halfspaces(normals, offsets, interior, flags: tuple = ()) -> Polytope:
    """Bounded halfspace intersection {p : normals @ p <= offsets}; ``interior`` must be strictly inside."""
    a = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    x0 = np.asarray(interior, dtype=float)
    n = a.shape[1]
    if n == 1:
        pos, neg = a[:, 0] > 0, a[:, 0] < 0
        hi = np.min(b[pos] / a[pos, 0])
        lo = np.max(b[neg] / a[neg, 0])
        verts = np.array([[lo], [hi]])
    else:
        hs = HalfspaceIntersection(np.hstack([a, -b[:, None]]), x0)
        verts = hs.intersections
    p = convex_hull(verts)
    return Polytope(**{**p.__dict__, "flags": tuple(flags)})


def regular_polygon(k: int, radius: float = 1.0, center=(0.0, 0.0)) -> Polytope:
    ang = 2 * np.pi * np.arange(k) / k
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * radius + np.asarray(center, dtype=float)
    return convex_hull(pts)


def box(lo, hi) -> Polytope:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    return convex_hull(corners)


def centroid(A: Polytope) -> np.ndarray:
    """Center of mass of the body (uniform density); vertex mean for lower-dimensional bodies."""
    if A.affine_dim == 0:
        return A.vertices[0].copy()
    local = (A.vertices - A.origin) @ A.basis
    d = A.affine_dim
    if d == 1:
        c_loc = np.array([0.5 * (local[:, 0].min() + local[:, 0].max())])
    else:
        hull = ConvexHull(local)
        apex = local.mean(axis=0)
        num = np.zeros(d)
        den = 0.0
        for simp in hull.simplices:
            s = local[simp]
            vol = abs(np.linalg.det(s - apex))
            num += vol * (s.sum(axis=0) + apex) / (d + 1)
            den += vol
        c_loc = num / den
    return A.origin + A.basis @ c_loc


# --------------------------------------------------------------------------- duals


def polar_dual(A: Polytope, p0, q0, lam: float, tol: Tolerances = DEFAULT_TOL) -> Polytope:
    """{q : <q - q0, p - p0> <= lam for all p in A}, clipped to a box of half-width ``tol.dual_box``.

    When ``p0`` is not interior to ``A`` the dual is unbounded; the clipped body is
    returned with the flag ``"unbounded"`` and an :class:`UnboundedDual` warning.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    p0 = np.asarray(p0, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    n = A.dim
    diffs = A.vertices - p0
    normals = diffs
    offsets = lam + diffs @ q0
    interior = A.full_dimensional and np.min(A.slack(p0)) > tol.inclusion
    flags = ()
    if not interior:
        flags = ("unbounded",)
        warnings.warn("base point not interior: polar dual clipped to bounding box", UnboundedDual, stacklevel=2)
    eye = np.eye(n)
    normals = np.vstack([normals, eye, -eye])
    offsets = np.concatenate([offsets, q0 + tol.dual_box, -q0 + tol.dual_box])
    nz = np.linalg.norm(normals, axis=1) > 0
    return from_halfspaces(normals[nz], offsets[nz], q0, flags=flags)


def dual_volume_bound(A: Polytope, q0, lam: float, tol: Tolerances = DEFAULT_TOL) -> DualVolumeReport:
    """Volume product of A and its polar dual centred at the barycenter, scaled by lam^n."""
    if not A.full_dimensional:
        raise DegenerateBody("body has empty interior")
    pcm = centroid(A)
    dual = polar_dual(A, pcm, q0, lam, tol)
    c = dual.volume * A.volume / lam**A.dim
    if not np.isfinite(c):
        raise DegenerateBody("non-finite volume product")
    return DualVolumeReport(dual.volume, A.volume, float(c), pcm, dual.flags)


# --------------------------------------------------------------------------- John ellipsoid


def mvee(points, tol: float = DEFAULT_TOL.mvee, max_iter: int = DEFAULT_TOL.mvee_max_iter) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid (Khachiyan iteration with Todd-Yildirim away steps).

    The returned shape is rescaled so every input point lies in the ellipsoid exactly.
    """
    pts = np.asarray(points, dtype=float)
    m, d = pts.shape
    shift = pts.mean(axis=0)
    P = (pts - shift).T
    Q = np.vstack([P, np.ones(m)])
    u = np.full(m, 1.0 / m)
    for it in range(max_iter):
        X = (Q * u) @ Q.T
        M = np.einsum("ij,ji->i", Q.T, np.linalg.solve(X, Q))
        j = int(np.argmax(M))
        support = u > 0
        k = int(np.flatnonzero(support)[np.argmin(M[support])])
        up, down = M[j] - (d + 1), (d + 1) - M[k]
        if up <= tol * (d + 1) and down <= tol * (d + 1):
            break
        if up >= down:
            step = up / ((d + 1) * (M[j] - 1.0))
            u *= 1.0 - step
            u[j] += step
        else:
            step = down / ((d + 1) * (M[k] - 1.0)) if M[k] > 1.0 else np.inf
            step = min(step, u[k] / (1.0 - u[k]))
            u *= 1.0 + step
            u[k] -= step
            u[k] = max(u[k], 0.0)
    else:
        raise NoConvergence(f"MVEE did not reach tolerance {tol} in {max_iter} iterations")
    c = P @ u
    S = (P * u) @ P.T - np.outer(c, c)
    shape = np.linalg.inv(S) / d
    diff = P.T - c
    g = np.einsum("ij,jk,ik->i", diff, shape, diff)
    shape = shape / g.max()
    shape = 0.5 * (shape + shape.T)
    return Ellipsoid(c + shift, shape)


def max_inscribed_ellipsoid(A: Polytope) -> Ellipsoid:
    """Maximum-volume ellipsoid inside A (log-det program; needs cvxpy)."""
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover
        raise ImportError("method='inscribed' needs the optional dependency cvxpy") from exc
    n = A.dim
    B = cp.Variable((n, n), PSD=True)
    d = cp.Variable(n)
    cons = [cp.norm(B @ A.normals[i]) + A.normals[i] @ d <= A.offsets[i] for i in range(len(A.offsets))]
    cp.Problem(cp.Maximize(cp.log_det(B)), cons).solve()
    Bv = 0.5 * (B.value + B.value.T)
    shape = np.linalg.inv(Bv @ Bv)
    return Ellipsoid(np.asarray(d.value, dtype=float), 0.5 * (shape + shape.T))


def john_inclusion_violation(A: Polytope, E: Ellipsoid) -> tuple[float, float]:
    """(inner, outer) worst violations of E in A in c + n(E - c), both as support-function excess."""
    n = A.dim
    inner = max(0.0, max(E.support(a) - b for a, b in zip(A.normals, A.offsets)))
    big = E.scaled(n)
    g = big.gauge(A.vertices)
    # convert the gauge excess to a distance-like quantity along the worst vertex ray
    outer = max(0.0, float(np.max(np.sqrt(g)) - 1.0)) * n / np.sqrt(np.max(E.shape.diagonal()))
    return float(inner), float(outer)


def john_ellipsoid(A: Polytope, method: str = "mvee", tol: Tolerances = DEFAULT_TOL):
    """Inner ellipsoid E and its center with E in A in center + n (E - center).

    ``method="mvee"`` shrinks the minimum-volume enclosing ellipsoid by n about its
    center; ``method="inscribed"`` uses the maximum-volume inscribed ellipsoid.
    """
    if not A.full_dimensional:
        raise DegenerateBody("body has empty interior")
    n = A.dim
    if method == "mvee":
        outer = mvee(A.vertices, tol.mvee, tol.mvee_max_iter)
        E = outer.scaled(1.0 / n)
    elif method == "inscribed":
        E = max_inscribed_ellipsoid(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    return E, E.center.copy()


# --------------------------------------------------------------------------- planes and widths


def supporting_plane_distance(A: Polytope, p, v, tol: Tolerances = DEFAULT_TOL) -> float:
    """Distance from p (in A) to the supporting plane with outward normal v."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if A.max_violation(p) > tol.inclusion:
        raise PointOutside(f"point violates a facet by {A.max_violation(p):.3g}")
    return float(max(0.0, np.max((A.vertices - p) @ v)))


def plane_gap(A: Polytope, v) -> float:
    """Distance between the two supporting planes orthogonal to v."""
    v = np.asarray(v, dtype=float)
    return A.support(v) + A.support(-v)


def width_segment(A: Polytope, v) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Longest chord of A parallel to v, by a linear program in (p, t)."""
    if not A.full_dimensional:
        raise DegenerateBody("body has empty interior")
    v = np.asarray(v, dtype=float)
    n = A.dim
    a, b = A.normals, A.offsets
    m = len(b)
    A_ub = np.vstack([np.hstack([a, np.zeros((m, 1))]), np.hstack([a, (a @ v)[:, None]])])
    b_ub = np.concatenate([b, b])
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    bounds = [(None, None)] * n + [(0, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise DegenerateBody(f"width LP failed: {res.message}")
    p = res.x[:n]
    t = float(res.x[-1])
    return t, (p, p + t * v)


# --------------------------------------------------------------------------- Bishop-Phelps


def _project_simplex_hull(V: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Closest point of conv(V) to p (tiny QP via NNLS with a heavily weighted sum row)."""
    if len(V) == 1:
        return V[0].copy()
    scale = 1e4 * max(1.0, float(np.abs(V).max()))
    M = np.vstack([V.T, scale * np.ones(len(V))])
    rhs = np.concatenate([p, [scale]])
    lam, _ = nnls(M, rhs)
    lam = lam / lam.sum()
    return lam @ V


def _cone_direction(G: np.ndarray, e: np.ndarray) -> np.ndarray | None:
    """Unit vector in cone{rows of G} closest to e."""
    mu, _ = nnls(G.T, e)
    w = mu @ G
    nw = np.linalg.norm(w)
    if nw > 1e-12:
        return w / nw
    best = G[int(np.argmax(G @ e))]
    return best / np.linalg.norm(best)


def faces(A: Polytope, tol: Tolerances = DEFAULT_TOL, max_codim: int | None = None):
    """Enumerate faces as (vertex indices, active halfspace indices), vertices included."""
    inc = [set(A.incident(i, tol.facet).tolist()) for i in range(len(A.vertices))]
    max_codim = A.dim if max_codim is None else max_codim
    seen = {}
    for i, I in enumerate(inc):
        for k in range(1, min(len(I), max_codim) + 1):
            for J in itertools.combinations(sorted(I), k):
                Js = set(J)
                verts = frozenset(w for w in range(len(inc)) if Js <= inc[w])
                if verts in seen:
                    continue
                active = set.intersection(*(inc[w] for w in verts))
                seen[verts] = tuple(sorted(active))
    return [(sorted(v), list(a)) for v, a in seen.items()]


def bishop_phelps(A: Polytope, p, e, rho: float, tol: Tolerances = DEFAULT_TOL):
    """Boundary point p_e and unit normal e_hat supporting A at p_e with

    ||p - p_e|| <= d(p, plane_e) / rho and ||e - e_hat|| <= 2 rho.

    All faces are scanned; on each face the nearest point to p and the unit normal
    closest to e are optimal for both bounds at once, so the scan is exhaustive.
    """
    p = np.asarray(p, dtype=float)
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if A.max_violation(p) > tol.inclusion:
        raise PointOutside("p is not in A")
    dist = max(0.0, A.support(e) - p @ e)
    best = None
    for vidx, active in faces(A, tol):
        p_e = _project_simplex_hull(A.vertices[vidx], p)
        e_hat = _cone_direction(A.normals[active], e)
        gap_p = np.linalg.norm(p - p_e)
        gap_e = np.linalg.norm(e - e_hat)
        if gap_p > dist / rho + 1e-9 or gap_e > 2 * rho + 1e-9:
            continue
        if A.support(e_hat) - p_e @ e_hat > 1e-9 * max(1.0, np.abs(A.vertices).max()):
            continue
        key = (round(gap_e, 12), round(gap_p, 12))
        if best is None or key < best[0]:
            best = (key, p_e, e_hat)
    if best is None:
        raise NoWitness("no supporting pair satisfies both bounds")
    return best[1], best[2]


# --------------------------------------------------------------------------- normal cones


def normal_cone(A: Polytope, p_e, tol: Tolerances = DEFAULT_TOL) -> NormalConeGenerators:
    """Generators (incident facet normals) of the normal cone at a vertex."""
    i = A.vertex_index(p_e, tol.facet)
    gens = A.normals[A.incident(i, tol.facet)]
    others = np.delete(A.vertices, i, axis=0)
    return NormalConeGenerators(A.vertices[i].copy(), gens.copy(), others)


def _ray_exit(A: Polytope, p: np.ndarray, direction: np.ndarray) -> float:
    rate = A.normals @ direction
    slack = A.slack(p)
    pos = rate > 1e-14
    if not np.any(pos):
        return np.inf
    return float(np.min(np.maximum(slack[pos], 0.0) / rate[pos]))


def inward_normal(A: Polytope, p_e, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    """Unit e0 in the strict normal cone at p_e with p_e - lam e0 in A for lam in (0, lam0].

    e0 is the max-min point of the normal-cone cross-section: maximise s subject to
    <w, g_i> >= s for every generator g_i, where w is a convex combination of the
    generators. Lower-dimensional bodies are handled inside their affine hull.
    """
    if len(A.vertices) < 2:
        raise NotExposed("a single point has no inward direction")
    i = A.vertex_index(p_e, tol.facet)
    pe = A.vertices[i]
    B = A.basis
    local_pts = (A.vertices - A.origin) @ B
    if A.affine_dim < A.dim:
        sub = convex_hull(local_pts)
        j = sub.vertex_index(local_pts[i])
        G = sub.normals[sub.incident(j, tol.facet)]
        others = np.delete(local_pts, i, axis=0) - local_pts[i]
    else:
        sub = A
        G = A.normals[A.incident(i, tol.facet)]
        others = np.delete(A.vertices, i, axis=0) - pe
    w = _maximin_direction(G)
    if w is None or not np.all(others @ w < 0):
        w = _strict_margin_direction(G, others)
    if w is None:
        raise NotExposed("strict normal cone is empty")
    e0 = B @ w if A.affine_dim < A.dim else w
    e0 = e0 / np.linalg.norm(e0)
    lam0 = _ray_exit(A, pe, -e0)
    if not np.isfinite(lam0) or lam0 <= 0:
        raise NotExposed("inward ray leaves A immediately")
    return e0, lam0


def _maximin_direction(G: np.ndarray) -> np.ndarray | None:
    k = len(G)
    if k == 0:
        return None
    gram = G @ G.T
    # variables: mu (k), s ; maximise s
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-gram, np.ones((k, 1))])
    b_ub = np.zeros(k)
    A_eq = np.hstack([np.ones((1, k)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * k + [(None, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        return None
    w = res.x[:k] @ G
    nw = np.linalg.norm(w)
    return w / nw if nw > 1e-14 else None


def _strict_margin_direction(G: np.ndarray, others: np.ndarray) -> np.ndarray | None:
    """w = mu @ G (mu in the simplex) maximising s with <w, g_i> >= s and <w, q> <= -s for q in ``others``."""
    k = len(G)
    if k == 0:
        return None
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.vstack([np.hstack([-(G @ G.T), np.ones((k, 1))]),
                      np.hstack([others @ G.T, np.ones((len(others), 1))])])
    A_eq = np.hstack([np.ones((1, k)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(A_ub)), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * k + [(None, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        return None
    w = res.x[:k] @ G
    nw = np.linalg.norm(w)
    return w / nw if nw > 1e-14 else None


def random_polytope(rng: np.random.Generator, n: int = 2, k: int | None = None) -> Polytope:
    """Hull of k random points in the unit cube, resampled until full-dimensional."""
    k = k or rng.integers(n + 2, 4 * n + 8)
    while True:
        P = convex_hull(rng.random((k, n)))
        if P.full_dimensional and P.volume > 1e-3:
            return P


# --------------------------------------------------------------------------- property battery


BATTERY_CHECKS = ("john", "bishop_phelps", "inward_normal", "dual_volume")


def _battery_case(args):
    check, seed, i, n = args
    gen = rng(seed, 40 + BATTERY_CHECKS.index(check), i)
    A = random_polytope(gen, n)
    scale = max(1.0, float(np.abs(A.vertices).max()))
    if check == "john":
        E, _ = john_ellipsoid(A)
        value = max(john_inclusion_violation(A, E))
        return {"check": check, "case": i, "value": value, "passed": value <= DEFAULT_TOL.inclusion}
    if check == "bishop_phelps":
        w = gen.dirichlet(np.ones(len(A.vertices)))
        p = w @ A.vertices
        e = gen.normal(size=n)
        e /= np.linalg.norm(e)
        rho = float(gen.uniform(0.05, 0.95))
        p_e, e_hat = bishop_phelps(A, p, e, rho)
        dist = max(0.0, A.support(e) - p @ e)
        value = max(np.linalg.norm(p - p_e) - dist / rho,
                    np.linalg.norm(e - e_hat) - 2 * rho,
                    A.support(e_hat) - p_e @ e_hat)
        return {"check": check, "case": i, "value": float(value), "passed": value <= 1e-9 * scale}
    if check == "inward_normal":
        k = int(gen.integers(len(A.vertices)))
        pe = A.vertices[k]
        e0, lam0 = inward_normal(A, pe)
        lams = lam0 * np.linspace(0.1, 1.0, 10)
        viol = max(A.max_violation(pe - t * e0) for t in lams)
        strict = float(np.max((np.delete(A.vertices, k, axis=0) - pe) @ e0))
        ok = viol <= 1e-9 * scale and strict < 0 and abs(np.linalg.norm(e0) - 1) < 1e-12
        return {"check": check, "case": i, "value": float(max(viol, strict)), "passed": bool(ok)}
    q0 = gen.normal(size=n)
    consts = [dual_volume_bound(A, q0, lam).constant for lam in (0.1, 1.0, 10.0)]
    value = (max(consts) - min(consts)) / max(consts)
    return {"check": check, "case": i, "value": float(value), "passed": value <= 1e-6}


def property_battery(seed: int, n_cases: int = 200, n: int = 2, checks=BATTERY_CHECKS) -> list[dict]:
    """Seeded battery of geometric post-conditions; one row per (check, case)."""
    jobs = [(ch, seed, i, n) for ch in checks for i in range(n_cases)]
    return parallel_map(_battery_case, jobs)
