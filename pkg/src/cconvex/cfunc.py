"""c-functions, semidiscrete c-convex potentials, sublevel sets, c-polar duals and c-cones."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cexp import momentum
from .config import DEFAULT_TOL, Tolerances, rng
from .cost import CostModel
from .errors import EmptyAdmissible, EmptyBoundary, EmptySet
from .geometry import Polytope, convex_hull

ROW_CHUNK = 4096


# ---------------------------------------------------------------------- grids


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centred grid on a box; ``oversample`` sub-cells per axis are used for quadrature."""

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple
    oversample: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if len(self.shape) != len(self.lo) or min(self.shape) < 1:
            raise ValueError("grid shape must give a positive count per axis")

    @classmethod
    def on_box(cls, box, resolution: int, oversample: int = 1) -> "Grid":
        box = np.asarray(box, dtype=float)
        return cls(box[:, 0], box[:, 1], (resolution,) * len(box), oversample)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def h(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.h))

    def axes(self, k: int = 1):
        return [self.lo[i] + (np.arange(self.shape[i] * k) + 0.5) * self.h[i] / k for i in range(self.n)]

    @property
    def points(self) -> np.ndarray:
        """Cell centres in C order, shape (size, n)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def quadrature(self):
        """(points, weights, owner) of the oversampled midpoint rule; ``owner`` is the coarse cell index."""
        k = self.oversample
        mesh = np.meshgrid(*self.axes(k), indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
        idx = np.meshgrid(*[np.arange(s * k) // k for s in self.shape], indexing="ij")
        owner = np.ravel_multi_index([i.ravel() for i in idx], self.shape)
        w = np.full(len(pts), self.cell_volume / k**self.n)
        return pts, w, owner

    def index_of(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ij = np.floor((x - self.lo) / self.h).astype(int)
        ij = np.clip(ij, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(ij.T, self.shape)


# ---------------------------------------------------------------------- c-functions and potentials


@dataclass(frozen=True)
class CFunction:
    """m(x) = -c(x, focus) + offset."""

    focus: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "focus", np.asarray(self.focus, dtype=float))
        object.__setattr__(self, "offset", float(self.offset))

    def __call__(self, c: CostModel, x):
        return -c.value(x, self.focus) + self.offset

    def shifted(self, d: float) -> "CFunction":
        return CFunction(self.focus, self.offset + d)


@dataclass(frozen=True, eq=False)
class SemidiscretePotential:
    """u(x) = max_j (-c(x, foci[j]) + offsets[j]); ``weights`` optionally give the target volume per focus."""

    cost: CostModel
    foci: np.ndarray
    offsets: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        foci = np.atleast_2d(np.asarray(self.foci, dtype=float))
        offs = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if len(foci) == 0 or len(foci) != len(offs):
            raise ValueError("a potential needs as many offsets as foci (at least one)")
        object.__setattr__(self, "foci", foci)
        object.__setattr__(self, "offsets", offs)
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @classmethod
    def from_pieces(cls, c: CostModel, pieces, weights=None) -> "SemidiscretePotential":
        return cls(c, np.array([p.focus for p in pieces]), np.array([p.offset for p in pieces]), weights)

    @property
    def pieces(self) -> list[CFunction]:
        return [CFunction(f, o) for f, o in zip(self.foci, self.offsets)]

    def __len__(self):
        return len(self.offsets)

    def piece_values(self, x) -> np.ndarray:
        """Matrix of -c(x_i, focus_j) + offset_j."""
        return -self.cost.pairwise(x, self.foci, check=False) + self.offsets

    def evaluate(self, x, return_index: bool = False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.empty(len(x))
        arg = np.empty(len(x), dtype=int)
        for s in range(0, len(x), ROW_CHUNK):
            P = self.piece_values(x[s:s + ROW_CHUNK])
            arg[s:s + ROW_CHUNK] = np.argmax(P, axis=1)
            vals[s:s + ROW_CHUNK] = P[np.arange(len(P)), arg[s:s + ROW_CHUNK]]
        return (vals, arg) if return_index else vals

    def __call__(self, x):
        v = self.evaluate(x)
        return v[0] if np.ndim(x) == 1 else v

    def shifted(self, d: float) -> "SemidiscretePotential":
        return SemidiscretePotential(self.cost, self.foci, self.offsets + d, self.weights)

    def to_dict(self) -> dict:
        d = {"pieces": [{"focus": f.tolist(), "offset": float(o)} for f, o in zip(self.foci, self.offsets)]}
        if self.weights is not None:
            d["weights"] = self.weights.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, c: CostModel, d: dict) -> "SemidiscretePotential":
        pieces = [CFunction(p["focus"], p["offset"]) for p in d["pieces"]]
        return cls.from_pieces(c, pieces, d.get("weights"))

    @classmethod
    def from_json(cls, c: CostModel, s: str) -> "SemidiscretePotential":
        return cls.from_dict(c, json.loads(s))


def focus_grid_potential(c: CostModel, grid: Grid, offsets=None) -> SemidiscretePotential:
    """Potential with one piece per cell centre of ``grid`` (weights = cell volumes)."""
    pts = grid.points
    offs = np.zeros(len(pts)) if offsets is None else np.asarray(offsets, dtype=float)
    return SemidiscretePotential(c, pts, offs, np.full(len(pts), grid.cell_volume))


def random_potential(c: CostModel, k: int, seed: int, spread: float = 0.05) -> SemidiscretePotential:
    gen = rng(seed, 30)
    foci = c.sample_omega_bar(gen, k)
    return SemidiscretePotential(c, foci, spread * gen.standard_normal(k))


# ---------------------------------------------------------------------- c-subdifferentials


@dataclass(frozen=True)
class Subdifferential:
    indices: np.ndarray
    foci: np.ndarray
    covectors: np.ndarray


def c_subdifferential(u: SemidiscretePotential, x, tol: Tolerances = DEFAULT_TOL) -> Subdifferential:
    """Foci of the pieces active at x (within tol.active) and their momenta pbar_(x, focus)."""
    x = np.asarray(x, dtype=float)
    vals = u.piece_values(x[None, :])[0]
    idx = np.flatnonzero(vals >= vals.max() - tol.active)
    foci = u.foci[idx]
    cov = u.cost.target_momentum(x, foci, check=False)
    return Subdifferential(idx, foci, np.atleast_2d(cov))


# ---------------------------------------------------------------------- regions and image volumes


@dataclass(frozen=True, eq=False)
class Region:
    """Subset of a grid given by the covered fraction of each cell."""

    grid: Grid
    coverage: np.ndarray

    @property
    def volume(self) -> float:
        return float(self.coverage.sum() * self.grid.cell_volume)

    @property
    def mask(self) -> np.ndarray:
        return self.coverage > 0

    @classmethod
    def from_mask(cls, grid: Grid, mask) -> "Region":
        return cls(grid, np.asarray(mask, dtype=float).ravel())

    @classmethod
    def from_predicate(cls, grid: Grid, inside, oversample: int = 4) -> "Region":
        """Coverage from a vectorised membership test evaluated on ``oversample``^n sub-cells."""
        g = Grid(grid.lo, grid.hi, grid.shape, oversample)
        pts, w, owner = g.quadrature()
        hit = np.asarray(inside(pts), dtype=float)
        cov = np.bincount(owner, weights=hit, minlength=grid.size) / oversample**grid.n
        return cls(grid, cov)

    @classmethod
    def from_polytope(cls, grid: Grid, P: Polytope, oversample: int = 4) -> "Region":
        return cls.from_predicate(grid, lambda X: np.min(P.offsets - X @ P.normals.T, axis=1) >= 0, oversample)

    @classmethod
    def from_momentum_polytope(cls, c: CostModel, grid: Grid, P: Polytope, anchor, oversample: int = 4) -> "Region":
        """The set cexp_anchor(P) of source points whose momenta from ``anchor`` lie in P."""
        anchor = np.asarray(anchor, dtype=float)

        def inside(X):
            Q = momentum(c, anchor, X, "source", check=False)
            return np.min(P.offsets - Q @ P.normals.T, axis=1) >= 0

        return cls.from_predicate(grid, inside, oversample)


@dataclass(frozen=True)
class ImageVolume:
    volume: float
    touched_volume: float
    mass: float
    cell_mass: np.ndarray
    cell_fraction: np.ndarray
    stderr: float = 0.0


def cell_masses(u: SemidiscretePotential, grid: Grid, density=None):
    """Lebesgue (or density-weighted) mass of every cell of u, by the oversampled midpoint rule."""
    pts, w, _ = grid.quadrature()
    if density is not None:
        w = w * density(pts)
    _, arg = u.evaluate(pts, return_index=True)
    return np.bincount(arg, weights=w, minlength=len(u))


def subdiff_image_volume(u: SemidiscretePotential, A: Region, mc_samples: int = 0, seed: int = 0) -> ImageVolume:
    """Size of the image of A under the c-subdifferential of a semidiscrete potential.

    The image is a finite focus set, so the result is mass weighted: each focus j
    contributes weights[j] * |A cap cell_j| / |cell_j| (the cell masses sum to |Omega|).
    Without weights the transported mass |A| is returned as ``volume``. With
    ``mc_samples`` > 0 the fractions are estimated from jittered samples instead of the
    midpoint rule and a standard error is reported.
    """
    grid = A.grid
    if mc_samples > 0:
        gen = rng(seed, 31)
        pts0, w0, owner0 = grid.quadrature()
        per = max(1, mc_samples // grid.size)
        jitter = (gen.random((per, len(pts0), grid.n)) - 0.5) * (grid.h / grid.oversample)
        pts = (pts0[None] + jitter).reshape(-1, grid.n)
        w = np.tile(w0, per) / per
        owner = np.tile(owner0, per)
    else:
        pts, w, owner = grid.quadrature()
    _, arg = u.evaluate(pts, return_index=True)
    cov = A.coverage[owner]
    total = np.bincount(arg, weights=w, minlength=len(u))
    inside = np.bincount(arg, weights=w * cov, minlength=len(u))
    frac = np.divide(inside, total, out=np.zeros_like(inside), where=total > 0)
    stderr = 0.0
    if mc_samples > 0 and u.weights is not None:
        hit = np.bincount(arg, weights=cov, minlength=len(u))
        cnt = np.bincount(arg, minlength=len(u))
        p = np.divide(hit, cnt, out=np.zeros_like(hit), where=cnt > 0)
        var = np.divide(p * (1 - p), cnt, out=np.zeros_like(p), where=cnt > 0)
        stderr = float(np.sqrt(np.sum(u.weights**2 * var)))
    touched = frac > 0
    if u.weights is not None:
        vol = float(u.weights @ frac)
        tvol = float(u.weights[touched].sum())
    else:
        vol = float(inside.sum())
        tvol = float(total[touched].sum())
    return ImageVolume(vol, tvol, float(inside.sum()), inside, frac, stderr)


# ---------------------------------------------------------------------- sublevel sets


@dataclass(frozen=True, eq=False)
class SublevelSet:
    """S = {u <= m} sampled on the cell centres of ``grid``."""

    u: SemidiscretePotential
    m: CFunction
    grid: Grid
    mask: np.ndarray
    boundary: np.ndarray
    compact: bool
    coord_hull: Polytope | None
    defect: float
    gap: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        return float(self.mask.sum() * self.grid.cell_volume)

    @property
    def points(self) -> np.ndarray:
        return self.grid.points[self.mask.ravel()]

    def region(self) -> Region:
        return Region.from_mask(self.grid, self.mask.ravel())

    def mask_rle(self) -> dict:
        return mask_to_rle(self.mask)


def mask_to_rle(mask) -> dict:
    """Run-length encoding of a boolean grid (C order), starting with a run of False."""
    flat = np.asarray(mask, dtype=bool).ravel()
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    bounds = np.concatenate([[0], change, [len(flat)]])
    runs = np.diff(bounds).tolist()
    if len(flat) and flat[0]:
        runs = [0] + runs
    return {"shape": list(np.shape(mask)), "runs": runs}


def mask_from_rle(d: dict) -> np.ndarray:
    vals = np.zeros(int(np.prod(d["shape"])), dtype=bool)
    pos, state = 0, False
    for r in d["runs"]:
        vals[pos:pos + r] = state
        pos += r
        state = not state
    return vals.reshape(d["shape"])


def boundary_faces(grid: Grid, mask: np.ndarray) -> np.ndarray:
    """Midpoints of cell faces separating masked from unmasked cells, including faces on the box boundary."""
    mask = mask.reshape(grid.shape)
    centers = [a for a in grid.axes()]
    out = []
    for ax in range(grid.n):
        pad = [(0, 0)] * grid.n
        pad[ax] = (1, 1)
        mp = np.pad(mask, pad, constant_values=False)
        lo = np.take(mp, range(0, mp.shape[ax] - 1), axis=ax)
        hi = np.take(mp, range(1, mp.shape[ax]), axis=ax)
        diff = lo != hi
        idx = np.argwhere(diff)
        if len(idx) == 0:
            continue
        coords = np.empty((len(idx), grid.n))
        for d in range(grid.n):
            if d == ax:
                coords[:, d] = grid.lo[d] + idx[:, d] * grid.h[d]
            else:
                coords[:, d] = centers[d][idx[:, d]]
        out.append(coords)
    return np.vstack(out) if out else np.zeros((0, grid.n))


def sublevel_set(u: SemidiscretePotential, m: CFunction, grid: Grid, tol: Tolerances = DEFAULT_TOL,
                 with_hull: bool = True) -> SublevelSet:
    """Mask of {u <= m + tol}, its face-midpoint boundary, compact-containment flag and
    the convexity defect of its image in momentum coordinates of focus(m)."""
    if min(grid.shape) < 16:
        raise ValueError("sublevel sets need at least 16 cells per axis")
    c = u.cost
    X = grid.points
    gap = m(c, X) - u.evaluate(X)
    mask = (gap >= -tol.sublevel).reshape(grid.shape)
    if not mask.any():
        raise EmptySet("sublevel set is empty on the grid")
    edge = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.n):
        sl = [slice(None)] * grid.n
        sl[ax] = 0
        edge[tuple(sl)] = True
        sl[ax] = -1
        edge[tuple(sl)] = True
    compact = not bool(np.any(mask & edge))
    bnd = boundary_faces(grid, mask)
    hull, defect = None, 0.0
    if with_hull:
        hull, defect = _coord_defect(c, grid, mask, m.focus)
    return SublevelSet(u, m, grid, mask, bnd, compact, hull, defect, gap.reshape(grid.shape))


def _coord_defect(c: CostModel, grid: Grid, mask: np.ndarray, focus):
    """Hull of the momentum image of the masked cells and the depth (in cells) of unmasked
    cells whose image falls inside it."""
    X = grid.points
    inside = mask.ravel()
    Q = momentum(c, focus, X, "source", check=False)
    hull = convex_hull(Q[inside])
    if not hull.full_dimensional:
        return hull, 0.0
    out = ~inside
    if not out.any():
        return hull, 0.0
    slack = np.min(hull.offsets - Q[out] @ hull.normals.T, axis=1)
    M = c.cross_many(X[out], np.asarray(focus, dtype=float)[None, :])
    cell = grid.cell_diameter * np.linalg.norm(M, ord=2, axis=(1, 2))
    depth = np.maximum(slack, 0.0) / cell
    return hull, float(depth.max())


# ---------------------------------------------------------------------- c-polar duals and c-cones


def _boundary_sample(A, n_edge: int = 16) -> np.ndarray:
    if isinstance(A, SublevelSet):
        pts = A.boundary
    elif isinstance(A, Polytope):
        V = A.vertices
        if A.dim == 2 and len(V) > 2:
            t = np.linspace(0, 1, n_edge, endpoint=False)
            nxt = np.roll(V, -1, axis=0)
            pts = (V[:, None, :] * (1 - t)[None, :, None] + nxt[:, None, :] * t[None, :, None]).reshape(-1, 2)
        else:
            pts = V
    else:
        pts = np.atleast_2d(np.asarray(A, dtype=float))
    if len(pts) == 0:
        raise EmptyBoundary("boundary sample is empty")
    return pts


def _polar_excess(c: CostModel, A, x, m: CFunction, Y: np.ndarray) -> np.ndarray:
    """max over the boundary sample of -c(xh, y) + c(x, y) - (m(xh) - m(x)), per focus y."""
    B = _boundary_sample(A)
    x = np.asarray(x, dtype=float)
    mB = m(c, B)
    mx = float(m(c, x))
    cx = c.value(x, Y, check=False)
    worst = np.full(len(Y), -np.inf)
    for s in range(0, len(B), 512):
        T = -c.pairwise(B[s:s + 512], Y, check=False) + cx[None, :] - (mB[s:s + 512] - mx)[:, None]
        worst = np.maximum(worst, T.max(axis=0))
    return worst


def c_polar_dual(c: CostModel, A, x, m: CFunction, lam: float, xbar_grid) -> np.ndarray:
    """Boolean mask over ``xbar_grid`` points of the c-polar dual of A associated to (x, m, lam):

    foci xbar with -c(xh, xbar) + c(x, xbar) - (m(xh) - m(x)) <= lam for every boundary sample xh.
    """
    Y = xbar_grid.points if isinstance(xbar_grid, Grid) else np.atleast_2d(np.asarray(xbar_grid, dtype=float))
    return _polar_excess(c, A, x, m, Y) <= lam


def c_cone(c: CostModel, x0, m: CFunction, A, lam: float, focus_grid) -> SemidiscretePotential:
    """c-cone over A with vertex x0 and depth lam below m, as a max over a focus grid.

    Each focus gets the largest offset with the c-function <= m on the boundary of A and
    <= m(x0) - lam at x0.
    """
    Y = focus_grid.points if isinstance(focus_grid, Grid) else np.atleast_2d(np.asarray(focus_grid, dtype=float))
    if len(Y) == 0:
        raise EmptyAdmissible("empty focus grid")
    B = _boundary_sample(A)
    x0 = np.asarray(x0, dtype=float)
    mB = m(c, B)
    best = np.full(len(Y), np.inf)
    for s in range(0, len(B), 512):
        best = np.minimum(best, (mB[s:s + 512][:, None] + c.pairwise(B[s:s + 512], Y, check=False)).min(axis=0))
    apex = float(m(c, x0)) - lam + c.value(x0, Y, check=False)
    offs = np.minimum(best, apex)
    slack = 1e-12 * max(1.0, float(np.abs(best).max()))
    if not np.any(apex <= best + slack):
        raise EmptyAdmissible("no focus attains the apex constraint")
    w = np.full(len(Y), focus_grid.cell_volume) if isinstance(focus_grid, Grid) else None
    return SemidiscretePotential(c, Y, offs, w)


def supports_at(u: SemidiscretePotential, x0, foci, grid: Grid, tol: float = 1e-9) -> np.ndarray:
    """Definition-based c-subdifferential test: focus y is in the c-subdifferential of u at x0
    when u + c(., y) is minimised at x0 over the grid points (within tol)."""
    c = u.cost
    X = grid.points
    uX = u.evaluate(X)
    x0 = np.asarray(x0, dtype=float)
    ux0 = float(u.evaluate(x0[None, :])[0])
    Y = np.atleast_2d(np.asarray(foci, dtype=float))
    out = np.empty(len(Y), dtype=bool)
    base = ux0 + c.value(x0, Y, check=False)
    for s in range(0, len(Y), 256):
        T = uX[:, None] + c.pairwise(X, Y[s:s + 256], check=False)
        out[s:s + 256] = T.min(axis=0) >= base[s:s + 256] - tol
    return out


def in_image_of(u: SemidiscretePotential, S: SublevelSet, foci) -> np.ndarray:
    """Focus y belongs to the c-subdifferential image of S when the minimum of u + c(., y)
    over the grid is attained inside S."""
    c = u.cost
    X = S.grid.points
    uX = u.evaluate(X)
    inside = S.mask.ravel()
    Y = np.atleast_2d(np.asarray(foci, dtype=float))
    out = np.empty(len(Y), dtype=bool)
    for s in range(0, len(Y), 256):
        T = uX[:, None] + c.pairwise(X, Y[s:s + 256], check=False)
        out[s:s + 256] = inside[np.argmin(T, axis=0)]
    return out


def band_difference(mask_a: np.ndarray, mask_b: np.ndarray, points: np.ndarray, radius: float) -> tuple[int, int]:
    """(size of the symmetric difference, how many of its points are farther than ``radius``
    from a point where mask_a changes value)."""
    diff = np.flatnonzero(mask_a != mask_b)
    if len(diff) == 0:
        return 0, 0
    far = 0
    for i in diff:
        d = np.linalg.norm(points - points[i], axis=1)
        near = d <= radius * (1 + 1e-9)
        if np.all(mask_a[near] == mask_a[i]):
            far += 1
    return len(diff), far


# ---------------------------------------------------------------------- map of cones


@dataclass
class ConeIdentityReport:
    """Comparison of the c-polar dual of A with the c-subdifferential of the c-cone at its vertex."""

    n_polar: int
    n_subdiff: int
    n_diff: int
    n_far: int
    band: float
    config: dict

    @property
    def passed(self) -> bool:
        return self.n_far == 0 and self.n_polar > 0

    def to_dict(self) -> dict:
        return {"n_polar": self.n_polar, "n_subdiff": self.n_subdiff, "n_diff": self.n_diff,
                "n_far": self.n_far, "band": self.band, "passed": self.passed, **self.config}


def _supports_over(u: SemidiscretePotential, x0, Y: np.ndarray, X: np.ndarray, tol: float) -> np.ndarray:
    c = u.cost
    uX = u.evaluate(X)
    ux0 = float(u.evaluate(np.asarray(x0, dtype=float)[None, :])[0])
    base = ux0 + c.value(x0, Y, check=False)
    out = np.empty(len(Y), dtype=bool)
    for s in range(0, len(Y), 256):
        T = uX[:, None] + c.pairwise(X, Y[s:s + 256], check=False)
        out[s:s + 256] = T.min(axis=0) >= base[s:s + 256] - tol
    return out


def map_of_cones_check(c: CostModel, seed: int, instance: int = 0, resolution: int = 48,
                       focus_resolution: int = 48, size: float = 0.3) -> ConeIdentityReport:
    """Seeded (A, m, lam) instance: polar dual of A at its centroid vs. the c-subdifferential of the
    c-cone K at that vertex, both on one focus grid over the target box.

    Subdifferential membership is the definition-based test over a grid of the source box
    augmented with the boundary sample of A. The band is one focus-grid cell diameter.
    """
    gen = rng(seed, 30, instance)
    n = c.n
    lo, hi = c.omega[:, 0], c.omega[:, 1]
    span = hi - lo
    raw = convex_hull(gen.random((int(gen.integers(n + 2, 4 * n + 6)), n)))
    while not (raw.full_dimensional and raw.volume > 1e-2):
        raw = convex_hull(gen.random((int(gen.integers(n + 2, 4 * n + 6)), n)))
    V = raw.vertices - raw.centroid
    V = V * (size * span / np.ptp(V, axis=0).max())
    x0 = lo + span * (0.5 + (gen.random(n) - 0.5) * (1 - 2 * size))
    A = convex_hull(V + x0)
    fb = c.omega_bar
    m = CFunction(fb[:, 0] + gen.random(n) * (fb[:, 1] - fb[:, 0]), 0.0)
    B = _boundary_sample(A)
    Yg = Grid.on_box(fb, focus_resolution)
    Y = Yg.points
    # lam at a random quantile of the excess so the dual is a proper, nonempty subset of the grid
    excess = _polar_excess(c, A, x0, m, Y)
    lam = float(max(np.quantile(excess, gen.uniform(0.2, 0.7)), 1e-6))
    polar = c_polar_dual(c, A, x0, m, lam, Y)
    K = c_cone(c, x0, m, A, lam, Yg)
    X = np.vstack([Grid.on_box(c.omega, resolution).points, B])
    sub = _supports_over(K, x0, Y, X, tol=1e-9 * max(1.0, float(np.abs(K.offsets).max())))
    n_diff, n_far = band_difference(polar, sub, Y, Yg.cell_diameter)
    cfg = {"seed": int(seed), "instance": int(instance), "kind": c.label, "lam": lam,
           "x0": x0.tolist(), "focus": m.focus.tolist(), "resolution": resolution,
           "focus_resolution": focus_resolution}
    return ConeIdentityReport(int(polar.sum()), int(sub.sum()), n_diff, n_far, Yg.cell_diameter, cfg)
