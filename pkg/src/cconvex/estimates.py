"""Numerical checks of the sharp growth and Aleksandrov estimates and the constructions behind them.

Every checker returns its two sides without the universal constant and reports the
implied constant; nothing here asserts a value for that constant.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_erosion
from scipy.optimize import minimize

from .cexp import cexp, cexp_many, momentum
from .cfunc import (CFunction, Grid, Region, SemidiscretePotential, SublevelSet, _boundary_sample,
                    cell_masses, focus_grid_potential, subdiff_image_volume, sublevel_set)
from .config import DEFAULT_TOL, Tolerances, parallel_map, rng
from .cost import CostModel
from .errors import (BandEmpty, DegenerateBody, DegenerateSection, DilationEscapes, DomainMarginExhausted,
                     EmptySection, EmptySet, NoConvergence, NoUniqueMaximizer, NotAVertex,
                     NotCompactlyContained, NotExposed, OutsideDomain, PointOutside)
from .geometry import (Polytope, box, centroid, convex_hull, faces, inward_normal, john_ellipsoid,
                       plane_gap, regular_polygon, supporting_plane_distance, width_segment)
from .reports import EstimateReport

CSV_FIELDS = ("instance", "estimate", "lhs", "rhs", "c_impl", "resolution", "seed")


# ---------------------------------------------------------------------- snapshots


def _grid_dict(g: Grid) -> dict:
    return {"lo": g.lo.tolist(), "hi": g.hi.tolist(), "shape": list(g.shape), "oversample": g.oversample}


def _grid_from(d: dict) -> Grid:
    return Grid(d["lo"], d["hi"], d["shape"], d.get("oversample", 1))


def _cfun_dict(m: CFunction) -> dict:
    return {"focus": m.focus.tolist(), "offset": m.offset}


def _snapshot(u: SemidiscretePotential, m: CFunction, grid: Grid, **kw) -> dict:
    return {"cost": u.cost.to_dict(), "u": u.to_dict(), "m": _cfun_dict(m), "grid": _grid_dict(grid), **kw}


def _restore(cfg: dict):
    c = CostModel.from_dict(cfg["cost"])
    u = SemidiscretePotential.from_dict(c, cfg["u"])
    m = CFunction(cfg["m"]["focus"], cfg["m"]["offset"])
    return c, u, m, _grid_from(cfg["grid"])


def recompute(report: EstimateReport) -> EstimateReport:
    """Re-run a sharp growth or Aleksandrov check from the configuration stored in its report."""
    cfg = report.config
    c, u, m, grid = _restore(cfg)
    if report.name == "sharp_growth":
        A = Polytope.from_dict(cfg["A"])
        return sharp_growth_check(u, m, A, cfg["M_hat"], grid, seed=report.seed)
    if report.name == "aleksandrov":
        return aleksandrov_check(u, m, np.asarray(cfg["x0"]), np.asarray(cfg["v"]), grid, seed=report.seed)
    raise ValueError(f"cannot recompute report {report.name!r}")


# ---------------------------------------------------------------------- shared pieces


def _coords(c: CostModel, focus, X) -> np.ndarray:
    return momentum(c, focus, np.atleast_2d(X), "source", check=False)


def _section(u, m, grid, tol) -> SublevelSet:
    try:
        return sublevel_set(u, m, grid, tol, with_hull=False)
    except EmptySet as exc:
        raise EmptySection(str(exc)) from None


def _max_gap(u: SemidiscretePotential, m: CFunction, S: SublevelSet) -> tuple[float, np.ndarray]:
    """sup of m - u over S: best cell centre, polished by Nelder-Mead inside the box."""
    c = u.cost
    k = int(np.argmax(S.gap))
    x = S.grid.points[k]
    best = float(S.gap.ravel()[k])
    lo, hi = S.grid.lo, S.grid.hi

    def neg(y):
        if np.any(y < lo) or np.any(y > hi):
            return np.inf
        return -(float(m(c, y)) - float(u.evaluate(y[None, :])[0]))

    res = minimize(neg, x, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "initial_simplex": x + np.vstack(
                       [np.zeros(len(x)), 0.5 * np.diag(S.grid.h)]), "maxiter": 400})
    if np.isfinite(res.fun) and -res.fun > best:
        return float(-res.fun), res.x
    return best, x


# ---------------------------------------------------------------------- sharp growth


def _check_dilation(u: SemidiscretePotential, m: CFunction, A: Polytope, kappa: float,
                    tol: Tolerances = DEFAULT_TOL) -> None:
    """Raise DilationEscapes unless the c-image of the kappa-dilate of A (about its centroid) lies in {u <= m}."""
    c = u.cost
    pcm = centroid(A)
    B = _boundary_sample(A) if c.n == 2 else A.vertices
    Q = np.vstack([pcm[None, :], pcm + kappa * (B - pcm)])
    try:
        X = cexp_many(c, m.focus, Q, "source")
    except (OutsideDomain, NoConvergence) as exc:
        raise DilationEscapes(f"dilated set leaves the source box: {exc}") from None
    gap = m(c, X) - u.evaluate(X)
    if np.min(gap) < -tol.sublevel:
        raise DilationEscapes(f"dilated set leaves S by {-np.min(gap):.3g}")


def sharp_growth_check(u: SemidiscretePotential, m: CFunction, A: Polytope, M_hat: float, grid: Grid,
                       seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> EstimateReport:
    """(sup_S (m - u))^n against |A| |image of A under the c-subdifferential of u|.

    A is a polytope in the momentum chart of the focus of m; the source set is its
    c-exponential image. The dilation of A by 2 M_hat about its centroid must lie in
    S = {u <= m}. ``c_impl`` is lhs / rhs, so the estimate holds with any constant at
    least 1 / c_impl (stored as ``extra["oriented_constant"]``).
    """
    c = u.cost
    n = c.n
    S = _section(u, m, grid, tol)
    flags = []
    kappa = 2.0 * float(M_hat)
    degenerate = not A.full_dimensional
    if degenerate:
        flags.append("degenerate")
    else:
        _check_dilation(u, m, A, kappa, tol)
    region = Region.from_momentum_polytope(c, grid, A, m.focus)
    img = subdiff_image_volume(u, region)
    sup, xs = _max_gap(u, m, S)
    lhs = max(sup, 0.0) ** n
    rhs = region.volume * img.volume if not degenerate else 0.0
    cfg = _snapshot(u, m, grid, A=A.to_dict(), M_hat=float(M_hat))
    return EstimateReport(
        "sharp_growth", float(lhs), float(rhs), cfg, int(grid.shape[0]), int(seed), flags,
        {"sup_gap": sup, "argmax": xs.tolist(), "A_volume": region.volume, "image_volume": img.volume,
         "S_volume": S.volume, "kappa": kappa,
         "oriented_constant": float(rhs / lhs) if lhs > 0 else float("inf")})


# ---------------------------------------------------------------------- Aleksandrov


def section_hull(S: SublevelSet) -> Polytope:
    """Hull of the momentum image (chart of the focus of m) of the face midpoints bounding S."""
    H = convex_hull(_coords(S.u.cost, S.m.focus, S.boundary))
    if not H.full_dimensional:
        raise DegenerateSection("momentum image of the section has empty interior")
    return H


def aleksandrov_check(u: SemidiscretePotential, m: CFunction, x0, v, grid: Grid, seed: int = 0,
                      tol: Tolerances = DEFAULT_TOL) -> EstimateReport:
    """(m(x0) - u(x0))^n against d(p0, planes) / (l d(planes)) |S| |image of S|.

    Planes, widths and p0 live in the momentum chart of the focus of m; S must stay at
    least one cell away from the grid boundary.
    """
    c = u.cost
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    S = _section(u, m, grid, tol)
    if not S.compact:
        raise NotCompactlyContained("section touches the outer layer of grid cells")
    g0 = float(m(c, x0)) - float(u.evaluate(x0[None, :])[0])
    if g0 < -tol.sublevel:
        raise PointOutside(f"x0 lies outside the section (m - u = {g0:.3g})")
    H = section_hull(S)
    p0 = _coords(c, m.focus, x0)[0]
    d_plane = min(supporting_plane_distance(H, p0, v), supporting_plane_distance(H, p0, -v))
    gap = plane_gap(H, v)
    length, _ = width_segment(H, v)
    if length <= 0 or gap <= 0:
        raise DegenerateSection("zero width in the requested direction")
    img = subdiff_image_volume(u, S.region())
    lhs = max(g0, 0.0) ** c.n
    factor = d_plane / (length * gap)
    rhs = factor * S.volume * img.volume
    cfg = _snapshot(u, m, grid, x0=x0.tolist(), v=v.tolist())
    return EstimateReport(
        "aleksandrov", float(lhs), float(rhs), cfg, int(grid.shape[0]), int(seed), [],
        {"gap_x0": g0, "d_plane": d_plane, "plane_gap": gap, "width": length, "S_volume": S.volume,
         "image_volume": img.volume, "coord_volume": H.volume})


# ---------------------------------------------------------------------- dual segments


def _margin(c: CostModel, anchor, p, w, side: str, t_cap: float) -> float:
    """Largest t <= t_cap with cexp(anchor, p + t w) inside its box (bisection)."""

    def ok(t):
        try:
            cexp(c, anchor, p + t * w, side)
            return True
        except (OutsideDomain, NoConvergence):
            return False

    if ok(t_cap):
        return t_cap
    lo, hi = 0.0, t_cap
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


@dataclass(frozen=True, eq=False)
class DualSegmentFamily:
    """c-functions m_t with foci on the c-segment cexp_x0(pbar + t w), each lowered to stay below m on S."""

    cost: CostModel
    x0: np.ndarray
    v: np.ndarray
    pbar: np.ndarray
    w: np.ndarray
    points: np.ndarray = field(repr=False)
    m: CFunction = None

    def focus(self, t: float) -> np.ndarray:
        return cexp(self.cost, self.x0, self.pbar + t * self.w, "target")

    def member(self, t: float) -> CFunction:
        f = self.focus(t)
        c = self.cost
        top = np.max(-c.value(self.points, f, check=False) - self.m(c, self.points))
        return CFunction(f, -float(top))


@dataclass
class DualSegmentReport:
    ts: np.ndarray
    diffs: np.ndarray
    d_plane: float
    lower: float
    upper: float
    t_margin: float

    @property
    def constant(self) -> float:
        """Smallest C with C^-1 t d <= diff <= C t (t + d) on the sampled t."""
        return max(1.0 / self.lower if self.lower > 0 else np.inf, self.upper)

    def to_dict(self) -> dict:
        return {"ts": self.ts.tolist(), "diffs": self.diffs.tolist(), "d_plane": self.d_plane,
                "lower": self.lower, "upper": self.upper, "constant": self.constant, "t_margin": self.t_margin}


def dual_segment_family(S: SublevelSet, x0, v, ts=None, n_t: int = 8, t_cap: float | None = None):
    """Family m_t^v for the section S = {u <= m} and unit covector v in the chart of the focus of m.

    The foci move so that d/dt of -c(y, xbar(t)) at t = 0 is <p_y, v>; the report holds
    min diff / (t d) and max diff / (t (t + d)) with d the distance from p0 to the
    supporting plane of coord S with outer normal v.
    """
    u, m = S.u, S.m
    c = u.cost
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    xbar = m.focus
    pbar = c.target_momentum(x0, xbar)
    w = c.cross_matrix(x0, xbar) @ v
    pts = S.points
    fam = DualSegmentFamily(c, x0, v, pbar, w, pts, m)
    if t_cap is None:
        t_cap = float(np.max(np.ptp(c.omega_bar, axis=1)))
    margin = _margin(c, x0, pbar, w, "target", t_cap)
    if ts is None:
        if margin <= 1e-12:
            raise DomainMarginExhausted("the c-segment of foci leaves the target box immediately")
        ts = margin * np.arange(1, n_t + 1) / n_t
    ts = np.asarray(ts, dtype=float)
    if np.any(ts > margin * (1 + 1e-12)):
        raise DomainMarginExhausted(f"t up to {ts.max():.3g} requested, target box allows {margin:.3g}")
    P = _coords(c, xbar, pts)
    p0 = _coords(c, xbar, x0)[0]
    d = float(np.max((P - p0) @ v))
    mx0 = float(m(c, x0))
    diffs = np.array([mx0 - float(fam.member(t)(c, x0)) if t > 0 else 0.0 for t in ts])
    pos = ts > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = float(np.min(diffs[pos] / (ts[pos] * d))) if d > 0 and pos.any() else float("nan")
        upper = float(np.max(diffs[pos] / (ts[pos] * (ts[pos] + d)))) if pos.any() else float("nan")
    return fam, DualSegmentReport(ts, diffs, d, lower, upper, margin)


# ---------------------------------------------------------------------- trapping planes


@dataclass
class TrappingBasis:
    basis: np.ndarray          # rows e_1 = v, e_2, ..., e_n
    axes: np.ndarray           # John axes w_i as rows, w_1 first
    alignment: float           # <v, w_1>
    det: float
    widths: np.ndarray         # d(Pi_{e_i}, Pi_{-e_i})
    length: float              # longest chord parallel to v
    report: EstimateReport

    @property
    def nondegenerate(self) -> bool:
        n = len(self.basis)
        return self.alignment >= 1.0 / n - 1e-12 and abs(self.det) >= 1.0 / n - 1e-12


def _aligned_axes(lengths: np.ndarray, U: np.ndarray, v: np.ndarray, rel: float = 1e-6) -> np.ndarray:
    """Orthonormal axes as columns; inside each group of equal semi-axes the first vector
    is the projection of v, so ties do not depend on the eigen-solver."""
    n = len(lengths)
    out = U.copy()
    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(lengths[j] - lengths[i]) <= rel * lengths[i]:
            j += 1
        if j - i > 1:
            G = U[:, i:j]
            cand = [G @ (G.T @ v)] + [G @ (G.T @ e) for e in np.eye(n)]
            Q = []
            for a in cand:
                for q in Q:
                    a = a - (q @ a) * q
                if np.linalg.norm(a) > 1e-8:
                    Q.append(a / np.linalg.norm(a))
                if len(Q) == j - i:
                    break
            out[:, i:j] = np.column_stack(Q)
        i = j
    return out


def trapping_basis(S_coord: Polytope, v, method: str = "mvee", tol: Tolerances = DEFAULT_TOL) -> TrappingBasis:
    """Basis e_1 = v, e_i = John axes w_i (i >= 2) after the renumbering that makes
    <v, w_1> maximal, with the box comparison l(S, v) prod_i d(Pi_{e_i}, Pi_{-e_i}) vs |S|."""
    if not S_coord.full_dimensional:
        raise DegenerateBody("body has empty interior")
    n = S_coord.dim
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    E, _ = john_ellipsoid(S_coord, method, tol)
    lengths, U = E.axes
    W = _aligned_axes(lengths, U, v).T
    s = W @ v
    W = np.where((s < 0)[:, None], -W, W)
    s = np.abs(s)
    k = int(np.argmax(s))
    order = [k] + [i for i in range(n) if i != k]
    W = W[order]
    basis = np.vstack([v[None, :], W[1:]])
    widths = np.array([plane_gap(S_coord, e) for e in basis])
    length, _ = width_segment(S_coord, v)
    lhs = length * float(np.prod(widths))
    rep = EstimateReport("trapping_box", lhs, float(S_coord.volume), {"vertices": S_coord.vertices.tolist(),
                                                                     "v": v.tolist(), "method": method})
    return TrappingBasis(basis, W, float(s[k]), float(np.linalg.det(basis)), widths, float(length), rep)


# ---------------------------------------------------------------------- localization (chopping)


def _clip_vertices(P: Polytope, a: np.ndarray, b: float) -> np.ndarray:
    """Vertices of P cut by {p : <a, p> >= b}."""
    V = P.vertices
    s = V @ a - b
    keep = [V[s >= 0]]
    if len(V) == 2:
        edges = [(0, 1)]
    else:
        edges = [tuple(f) for f, _ in faces(P, max_codim=P.dim) if len(f) == 2]
    for i, j in edges:
        if s[i] * s[j] < 0:
            t = s[i] / (s[i] - s[j])
            keep.append(((1 - t) * V[i] + t * V[j])[None, :])
    return np.vstack(keep)


def tau_for_ball(H: Polytope, p_e: np.ndarray, e0: np.ndarray, delta: float, iters: int = 80) -> float:
    """Largest tau with H cap {<p - p_e, e0> >= -tau} inside the closed ball B_delta(p_e)."""
    R = np.max(np.linalg.norm(H.vertices - p_e, axis=1))
    if R <= delta:
        return float(np.max((p_e - H.vertices) @ e0))

    def fits(tau):
        V = _clip_vertices(H, e0, e0 @ p_e - tau)
        return np.max(np.linalg.norm(V - p_e, axis=1)) <= delta * (1 + 1e-12)

    lo, hi = 0.0, float(np.max((p_e - H.vertices) @ e0))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if fits(mid) else (lo, mid)
    return lo


@dataclass(frozen=True, eq=False)
class ChoppingFamily:
    """m_t(x) = -c(x, xbar(t)) + c(x_e, xbar(t)) + m0(x_e) + tau t with xbar(t) = cexp_{x_e}(pbar0 + t w)."""

    cost: CostModel
    base: CFunction
    x_e: np.ndarray
    delta: float
    tau: float
    e0: np.ndarray
    p_e: np.ndarray
    pbar0: np.ndarray
    w: np.ndarray
    t_admitted: float

    def focus(self, t: float) -> np.ndarray:
        if t > self.t_admitted * (1 + 1e-12):
            raise DomainMarginExhausted(f"t = {t:.3g} beyond the admitted range {self.t_admitted:.3g}")
        if t == 0:
            return self.base.focus.copy()
        return cexp(self.cost, self.x_e, self.pbar0 + t * self.w, "target")

    def member(self, t: float) -> CFunction:
        f = self.focus(t)
        c = self.cost
        off = float(c.value(self.x_e, f)) + float(self.base(c, self.x_e)) + self.tau * t
        return CFunction(f, off)

    __call__ = member


@dataclass
class ChoppingCheck:
    t: float
    ball_ok: bool
    max_dist: float
    exposed_inside: bool
    ratio: float


@dataclass
class ChoppingReport:
    t_star: float
    checks: list
    eps0: float
    tau_star: float
    lam0: float
    contact_points: int
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"t_star": self.t_star, "eps0": self.eps0, "tau_star": self.tau_star, "lam0": self.lam0,
                "contact_points": self.contact_points, "flags": list(self.flags),
                "checks": [c.__dict__ for c in self.checks]}


def contact_set(u: SemidiscretePotential, m0: CFunction, grid: Grid, band: float) -> np.ndarray:
    X = grid.points
    return np.abs(u.evaluate(X) - m0(u.cost, X)) <= band


def check_chopping(fam: ChoppingFamily, u: SemidiscretePotential, grid: Grid, t: float,
                   S0_points: np.ndarray, level_tol: float = 1e-12) -> ChoppingCheck:
    """Both inclusion properties of the chopped section at parameter t, on the cell centres of grid.

    The section is {u <= m_t + level_tol}; the tolerance must stay far below tau t,
    the height of m_t over u at x_e.
    """
    c = u.cost
    m_t = fam.member(t)
    X = grid.points
    uX = u.evaluate(X)
    gap = m_t(c, X) - uX
    inside = gap >= -level_tol
    P = _coords(c, fam.base.focus, X[inside])
    dist = float(np.max(np.linalg.norm(P - fam.p_e, axis=1))) if len(P) else 0.0
    ball_ok = dist <= fam.delta * (1 + 1e-9)
    ue = float(u.evaluate(fam.x_e[None, :])[0])
    height = float(m_t(c, fam.x_e)) - ue
    sup = float(np.max(gap[inside])) if inside.any() else height
    worst_below = float(np.max(u.evaluate(S0_points) - m_t(c, S0_points)))
    r1 = height / sup if sup > 0 else 0.0
    r2 = height / (sup + worst_below) if sup + worst_below > 0 else 0.0
    return ChoppingCheck(float(t), bool(ball_ok), dist, bool(height > 0), float(min(r1, r2)))


def chopping_family(u: SemidiscretePotential, m0: CFunction, x_e, delta: float, grid: Grid,
                    tol: Tolerances = DEFAULT_TOL, n_probe: int = 24, n_verify: int = 16):
    """Chopping family at the exposed contact point x_e, with the largest verified t*."""
    c = u.cost
    x_e = np.asarray(x_e, dtype=float)
    band = tol.contact_band
    mask = contact_set(u, m0, grid, band)
    if not mask.any():
        raise BandEmpty("no cell centre within the contact band")
    S0 = grid.points[mask]
    if abs(float(u.evaluate(x_e[None, :])[0]) - float(m0(c, x_e))) > band:
        raise NotExposed("x_e is not in the contact set")
    focus = m0.focus
    H = convex_hull(_coords(c, focus, np.vstack([S0, x_e[None, :]])))
    p_e = _coords(c, focus, x_e)[0]
    try:
        H.vertex_index(p_e)
        e0, lam0 = inward_normal(H, p_e, tol)
    except NotAVertex:
        raise NotExposed("x_e is not a vertex of the momentum hull of the contact set") from None
    tau_star = tau_for_ball(H, p_e, e0, delta)
    tau = min(tau_star, delta)
    pbar0 = c.target_momentum(x_e, focus)
    w = c.cross_matrix(x_e, focus) @ e0
    t_adm = _margin(c, x_e, pbar0, w, "target", float(np.max(np.ptp(c.omega_bar, axis=1))))
    fam = ChoppingFamily(c, m0, x_e, float(delta), float(tau), e0, p_e, pbar0, w, float(t_adm))
    flags = []
    if tau <= 0:
        flags.append("tau_zero")

    def good(t):
        ch = check_chopping(fam, u, grid, t, S0)
        return ch.ball_ok and ch.exposed_inside, ch

    checks = []
    probes = t_adm * 0.5 ** np.arange(n_probe)
    t_pass = 0.0
    for t in probes[::-1]:
        ok, ch = good(t)
        checks.append(ch)
        if not ok:
            break
        t_pass = t
    # refine between the last pass and the first failure
    t_fail = None if t_pass == probes[0] else (t_pass * 2 if t_pass > 0 else probes[-1])
    if t_fail is not None and t_pass > 0:
        lo, hi = t_pass, min(t_fail, t_adm)
        for _ in range(20):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if good(mid)[0] else (lo, mid)
        t_pass = lo
    # dense verification below t*; shrink past any failure
    t_star = t_pass
    for _ in range(10):
        if t_star <= 0:
            break
        dense = t_star * np.arange(1, n_verify + 1) / n_verify
        res = [good(t) for t in dense]
        bad = [t for t, (ok, _) in zip(dense, res) if not ok]
        if not bad:
            checks.extend(ch for _, ch in res)
            break
        t_star = 0.9 * min(bad)
    else:
        t_star = 0.0
    if t_star <= 0:
        flags.append("no_admissible_t")
    below = [ch.ratio for ch in checks if 0 < ch.t <= t_star]
    eps0 = float(min(below)) if below else 0.0
    checks.sort(key=lambda ch: ch.t)
    return fam, ChoppingReport(float(t_star), checks, eps0, float(tau_star), float(lam0), int(mask.sum()), flags)


def two_piece_instance(c: CostModel, seed: int, resolution: int = 48):
    """u = max of two c-functions whose ridge runs through cell centres, with m0 touching u along the ridge.

    Only the flat kinds have an exact c-function touching along the whole ridge (the
    average of the two pieces). Returns (u, m0, x_e, grid).
    """
    if not c.flat:
        raise ValueError("two-piece contact instances need a flat cost kind")
    n = c.n
    gen = rng(seed, 40)
    grid = Grid.on_box(c.omega, resolution)
    dirs = [np.eye(n)[0], np.eye(n)[-1]]
    if n >= 2:
        dirs += [np.r_[1.0, 1.0, np.zeros(n - 2)] / np.sqrt(2), np.r_[1.0, -1.0, np.zeros(n - 2)] / np.sqrt(2)]
    nrm = dirs[int(gen.integers(len(dirs)))]
    q = resolution // 4
    idx = gen.integers(q, resolution - q, size=n)
    xs = grid.lo + (idx + 0.5) * grid.h
    mid = c.omega_bar.mean(axis=1) + 0.2 * (gen.random(n) - 0.5) * np.ptp(c.omega_bar, axis=1)
    s = 0.05 + 0.15 * gen.random()
    a, b = mid - s * nrm, mid + s * nrm
    u0 = float(gen.standard_normal())
    la = u0 + float(c.value(xs, a))
    lb = u0 + float(c.value(xs, b))
    u = SemidiscretePotential(c, np.vstack([a, b]), np.array([la, lb]))
    m0 = CFunction(0.5 * (a + b), u0 + float(c.value(xs, 0.5 * (a + b))))
    mask = contact_set(u, m0, grid, DEFAULT_TOL.contact_band)
    S0 = grid.points[mask]
    P = _coords(c, m0.focus, S0)
    direction = gen.standard_normal(n)
    direction -= (direction @ nrm) * nrm
    x_e = S0[int(np.argmax(P @ direction))] if np.linalg.norm(direction) > 1e-9 else S0[0]
    return u, m0, x_e, grid


# ---------------------------------------------------------------------- strict convexity cone


@dataclass
class ConeReport:
    status: str                  # "trivial", "hypotheses_not_met" or "checked"
    flags: list
    q0: np.ndarray | None = None
    p_max: np.ndarray | None = None
    rs: np.ndarray | None = None
    interior_fraction: np.ndarray | None = None
    sector_mass: np.ndarray | None = None
    cone_mass: np.ndarray | None = None
    perturbations: int = 0

    @property
    def mass_decreasing(self) -> bool:
        """Cone-ball mass is nonincreasing as r decreases (rs are given in decreasing order)."""
        if self.cone_mass is None:
            return True
        return bool(np.all(np.diff(self.cone_mass) <= 1e-15))

    def to_dict(self) -> dict:
        def a(x):
            return None if x is None else np.asarray(x).tolist()

        return {"status": self.status, "flags": list(self.flags), "q0": a(self.q0), "p_max": a(self.p_max),
                "rs": a(self.rs), "interior_fraction": a(self.interior_fraction),
                "sector_mass": a(self.sector_mass), "cone_mass": a(self.cone_mass),
                "mass_decreasing": self.mass_decreasing, "perturbations": self.perturbations}


def _in_cone(D: np.ndarray, qhat: np.ndarray, r: float) -> np.ndarray:
    along = D @ qhat
    perp = np.linalg.norm(D - along[:, None] * qhat, axis=1)
    return r * along >= perp


def _has_interior(mask: np.ndarray) -> bool:
    return bool(binary_erosion(mask, border_value=0).any())


def strict_convexity_cone(u: SemidiscretePotential, m0: CFunction, x0, rs, grid: Grid, spt=None,
                          density=None, seed: int = 0, n_dirs: int = 2000, base_eps: float = 1e-3,
                          max_doublings: int = 8, tol: Tolerances = DEFAULT_TOL) -> ConeReport:
    """Cone sector experiment at a contact point x0 of m0 and u.

    ``rs`` is a decreasing sequence of radii. For each r the report records the fraction
    of sampled sector momenta whose c-exponential lies inside the target box, the
    source mass (restricted to ``spt``) of cells whose focus momentum lies in the
    sector C r-cone cap (B_r minus B_{r/2}), and the same for the whole cone cap B_r.
    """
    c = u.cost
    x0 = np.asarray(x0, dtype=float)
    rs = np.asarray(rs, dtype=float)
    mask = contact_set(u, m0, grid, tol.contact_band)
    pts = grid.points[mask]
    if len(pts) <= 1 or np.max(np.linalg.norm(pts - x0, axis=1)) <= grid.cell_diameter:
        return ConeReport("trivial", ["single_point_contact"])
    flags = []
    status = "checked"
    if _has_interior(mask.reshape(grid.shape)):
        status = "hypotheses_not_met"
        flags.append("contact set has interior: target is not density bounded")
    focus = m0.focus
    H = convex_hull(_coords(c, focus, pts))
    pbar0 = c.target_momentum(x0, focus)
    Minv = np.linalg.inv(c.cross_matrix(x0, focus))
    q1 = c.target_momentum(x0, c.omega_bar.mean(axis=1)) - pbar0
    if np.linalg.norm(q1) < 1e-12:
        q1 = np.eye(c.n)[0]
    gen = rng(seed, 50)
    q0 = q1
    scale = np.max(np.abs(H.vertices)) + 1.0
    for k in range(max_doublings + 1):
        if k > 0:
            xi = gen.standard_normal(c.n)
            q0 = q1 + base_eps * 2 ** (k - 1) * np.linalg.norm(q1) * xi / np.linalg.norm(xi)
        vals = H.vertices @ (Minv @ q0) / np.linalg.norm(q0)
        top = np.sort(vals)[::-1]
        if len(top) == 1 or top[0] - top[1] > 1e-9 * scale:
            break
    else:
        raise NoUniqueMaximizer("linear functional keeps several maximizers after all perturbations")
    p_max = H.vertices[int(np.argmax(vals))]
    qhat = q0 / np.linalg.norm(q0)
    # sampled sector points: random directions and radii in [r/2, r]
    D = gen.standard_normal((n_dirs, c.n))
    D /= np.linalg.norm(D, axis=1)[:, None]
    radial = 0.5 + 0.5 * gen.random(n_dirs)
    Pbar = c.target_momentum(x0, u.foci, check=False)
    rel = Pbar - pbar0
    dist = np.linalg.norm(rel, axis=1)
    if spt is not None:
        spt = np.asarray(spt, dtype=float)

        def dens(X):
            inside = np.all((X >= spt[:, 0]) & (X <= spt[:, 1]), axis=1).astype(float)
            return inside * (density(X) if density is not None else 1.0)
    else:
        dens = density
    masses = cell_masses(u, grid, dens)
    frac, sector, cone = [], [], []
    for r in rs:
        ok = _in_cone(D, qhat, r)
        if ok.any():
            Q = pbar0 + (r * radial[ok])[:, None] * D[ok]
            Y = cexp_many(c, x0, Q, "target", check_domain=False)
            inside = np.all((Y > c.omega_bar[:, 0]) & (Y < c.omega_bar[:, 1]), axis=1)
            frac.append(float(inside.mean()))
        else:
            frac.append(float("nan"))
        inc = _in_cone(rel, qhat, r)
        sector.append(float(masses[inc & (dist <= r) & (dist >= r / 2)].sum()))
        cone.append(float(masses[inc & (dist <= r) & (dist > 0)].sum()))
    return ConeReport(status, flags, q0, p_max, rs, np.array(frac), np.array(sector), np.array(cone), k)


# ---------------------------------------------------------------------- seeded instances


@dataclass(frozen=True, eq=False)
class SectionInstance:
    u: SemidiscretePotential
    m: CFunction
    x0: np.ndarray
    grid: Grid
    A: Polytope
    seed: int


def envelope_instance(resolution: int = 64, focus_resolution: int = 32) -> SectionInstance:
    """Quadratic cost on [-1.5, 1.5]^2: u is the envelope of the supporting planes of |x|^2/2
    at a focus grid (minus |x|^2/2), m = 1/2 - |x|^2/2 and A the disk of radius 1/4."""
    box2 = [[-1.5, 1.5]] * 2
    c = CostModel.make("quadratic", 2, omega=box2, omega_bar=box2)
    u = focus_grid_potential(c, Grid.on_box(box2, focus_resolution))
    m = CFunction([0.0, 0.0], 0.5)
    return SectionInstance(u, m, np.zeros(2), Grid.on_box(box2, resolution, 2), regular_polygon(64, 0.25), 0)


def _kappa(c: CostModel) -> float:
    X = c.omega[:, 0] + np.array(list(np.ndindex(*(2,) * c.n))) * np.ptp(c.omega, axis=1)
    Y = c.omega_bar[:, 0] + np.array(list(np.ndindex(*(2,) * c.n))) * np.ptp(c.omega_bar, axis=1)
    XX = np.repeat(X, len(Y), axis=0)
    YY = np.tile(Y, (len(X), 1))
    return 2.0 * float(np.max(np.linalg.norm(c.cross_many(XX, YY), ord=2, axis=(1, 2))))


def section_instance(c: CostModel, seed: int, resolution: int = 32, focus_resolution: int | None = None,
                     M_hat: float = 1.0) -> SectionInstance:
    """Seeded compactly contained section of a uniformly c-convex potential.

    u(x) = max_j (-c(x, y_j) - psi(y_j)) with psi(y) = kappa |y - y*|^2 / 2 + <p_c, y>
    on a focus grid covering the image of the source box; m is the piece active at a
    random x0 raised by half the smallest value of u - m on the outer cell layer, and A
    is a polygon (box for n != 2) around p0 whose 2 M_hat dilation stays in S.
    """
    n = c.n
    gen = rng(seed, 60)
    focus_resolution = focus_resolution or {1: 64, 2: 24, 3: 10}.get(n, 8)
    kappa = _kappa(c)
    ystar = c.omega_bar.mean(axis=1)
    xc = c.omega.mean(axis=1)
    pc = c.source_momentum(xc, ystar)
    corners = c.omega[:, 0] + np.array(list(np.ndindex(*(2,) * n))) * np.ptp(c.omega, axis=1)
    spread = np.max(np.abs(c.source_momentum(corners, ystar) - pc), axis=0) / kappa
    lo = np.maximum(ystar - 1.5 * spread, c.omega_bar[:, 0])
    hi = np.minimum(ystar + 1.5 * spread, c.omega_bar[:, 1])
    fgrid = Grid(lo, hi, (focus_resolution,) * n)
    Y = fgrid.points
    psi = 0.5 * kappa * np.sum((Y - ystar) ** 2, axis=1) + Y @ pc
    u = SemidiscretePotential(c, Y, -psi, np.full(len(Y), fgrid.cell_volume))
    grid = Grid.on_box(c.omega, resolution, 2)
    X = grid.points
    uX = u.evaluate(X)
    edge = np.zeros(grid.shape, dtype=bool)
    for ax in range(n):
        sl = [slice(None)] * n
        sl[ax] = 0
        edge[tuple(sl)] = True
        sl[ax] = -1
        edge[tuple(sl)] = True
    for _ in range(50):
        x0 = c.omega[:, 0] + (0.3 + 0.4 * gen.random(n)) * np.ptp(c.omega, axis=1)
        _, j = u.evaluate(x0[None, :], return_index=True)
        j = int(j[0])
        piece = CFunction(Y[j], -psi[j])
        w = (uX - piece(c, X)).reshape(grid.shape)
        h = 0.5 * float(np.min(w[edge])) * (0.5 + 0.5 * gen.random())
        m = piece.shifted(h)
        S = sublevel_set(u, m, grid, with_hull=False)
        if h > 0 and S.compact and S.mask.sum() >= 4**n:
            break
    else:
        raise EmptySection("no compactly contained section found for this seed")
    P = _coords(c, m.focus, S.boundary)
    H = convex_hull(P)
    p0 = _coords(c, m.focus, x0)[0]
    rho = float(np.min(H.slack(p0)))
    r = rho / (2.0 * M_hat * 1.25)
    for _ in range(6):
        A = regular_polygon(16, r, p0) if n == 2 else box(p0 - r / np.sqrt(n), p0 + r / np.sqrt(n))
        try:
            _check_dilation(u, m, A, 2.0 * M_hat)
            break
        except DilationEscapes:
            r *= 0.5
    else:
        raise DilationEscapes("could not fit the test set inside the section")
    return SectionInstance(u, m, x0, grid, A, int(seed))


def estimate_sweep(c: CostModel, n_instances: int, seed: int, resolution: int = 32,
                   M_hat: float = 1.0) -> list[tuple[str, EstimateReport]]:
    """Sharp growth and Aleksandrov reports on seeded section instances, in seed order."""

    def one(k):
        inst = section_instance(c, seed + k, resolution, M_hat=M_hat)
        gen = rng(seed + k, 61)
        v = gen.standard_normal(c.n)
        v /= np.linalg.norm(v)
        sg = sharp_growth_check(inst.u, inst.m, inst.A, M_hat, inst.grid, seed=seed + k)
        al = aleksandrov_check(inst.u, inst.m, inst.x0, v, inst.grid, seed=seed + k)
        tag = f"{c.label}-{seed + k}"
        return [(tag, sg), (tag, al)]

    out = []
    for rows in parallel_map(one, range(n_instances)):
        out.extend(rows)
    return out


def estimates_csv(rows) -> str:
    """Deterministic CSV text for (instance id, EstimateReport) rows."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_FIELDS)
    for tag, rep in rows:
        wr.writerow([tag, rep.name, repr(float(rep.lhs)), repr(float(rep.rhs)), repr(float(rep.c_impl)),
                     rep.resolution, rep.seed])
    return buf.getvalue()
