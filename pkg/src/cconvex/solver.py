"""Semidiscrete optimal transport for a general cost by damped ascent on the Kantorovich dual."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

from .cfunc import Grid, Region, SemidiscretePotential
from .config import DEFAULT_TOL, Tolerances, parallel_map, rng
from .cost import CostModel, audit_structure
from .errors import ConfigError, MassMismatch, NoConvergence, NondifferentiablePoint
from .geometry import convex_hull

CHUNK = 8192

DISCLAIMER = ("Discrete proxy only: cell diameters and the cell-to-atom assignment are measured for "
              "semidiscrete solutions; the continuity and injectivity statements concern the continuum limit.")


# ---------------------------------------------------------------------- measures


@dataclass(frozen=True, eq=False)
class SourceMeasure:
    """Piecewise constant density on the cells of ``grid`` (the box of spt(rho)), normalised to mass 1."""

    grid: Grid
    density: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float).ravel()
        if d.size != self.grid.size:
            raise ConfigError("density needs one value per grid cell")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ConfigError("density must be finite and nonnegative")
        total = d.sum() * self.grid.cell_volume
        if total <= 0:
            raise ConfigError("density has zero mass")
        object.__setattr__(self, "density", d / total)

    @classmethod
    def uniform(cls, box, resolution: int, oversample: int = 2) -> "SourceMeasure":
        g = Grid.on_box(box, resolution, oversample)
        return cls(g, np.ones(g.size))

    @classmethod
    def from_function(cls, box, resolution: int, fn, oversample: int = 2) -> "SourceMeasure":
        g = Grid.on_box(box, resolution, oversample)
        return cls(g, fn(g.points))

    @property
    def box(self) -> np.ndarray:
        return np.column_stack([self.grid.lo, self.grid.hi])

    @property
    def alpha(self) -> tuple[float, float]:
        pos = self.density[self.density > 0]
        return float(pos.min()), float(pos.max())

    def quadrature(self):
        pts, w, owner = self.grid.quadrature()
        return pts, w * self.density[owner], owner

    def check_inside(self, c: CostModel) -> None:
        """spt(rho) must sit inside omega with at least one cell to spare on every side."""
        h = self.grid.h
        if np.any(self.grid.lo - h < c.omega[:, 0] - 1e-12) or np.any(self.grid.hi + h > c.omega[:, 1] + 1e-12):
            raise ConfigError("support of the source density must stay one cell inside the source box")

    def to_dict(self) -> dict:
        return {"lo": self.grid.lo.tolist(), "hi": self.grid.hi.tolist(), "shape": list(self.grid.shape),
                "oversample": self.grid.oversample, "density": self.density.tolist()}


@dataclass(frozen=True, eq=False)
class TargetAtoms:
    """Atoms x̄_j with masses nu_j; ``density`` holds the target density at each atom (for volume ratios)."""

    points: np.ndarray
    masses: np.ndarray
    density: np.ndarray | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        m = np.asarray(self.masses, dtype=float).ravel()
        if len(P) != len(m):
            raise ConfigError("one mass per atom")
        if np.any(m <= 0):
            raise ConfigError("atom masses must be positive")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ConfigError(f"atom masses sum to {m.sum():.15g}, not 1")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "masses", m)
        if self.density is not None:
            object.__setattr__(self, "density", np.asarray(self.density, dtype=float).ravel())

    @classmethod
    def uniform(cls, points) -> "TargetAtoms":
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(P, np.full(len(P), 1.0 / len(P)))

    def __len__(self):
        return len(self.masses)

    def check_inside(self, c: CostModel) -> None:
        lo, hi = c.omega_bar[:, 0], c.omega_bar[:, 1]
        if np.any(self.points <= lo) or np.any(self.points >= hi):
            raise ConfigError("atoms must lie strictly inside the target box")

    def to_dict(self) -> dict:
        d = {"points": self.points.tolist(), "masses": self.masses.tolist()}
        if self.density is not None:
            d["density"] = self.density.tolist()
        return d


def quantize(box, n_atoms: int, seed: int = 0, density=None, samples: int = 20000) -> TargetAtoms:
    """Quantize a density on a box into n_atoms atoms.

    A perfect n-th power gives the regular grid of cell centres with cell masses;
    otherwise seeded Lloyd iterations on density-weighted samples are used.
    """
    box = np.asarray(box, dtype=float)
    n = len(box)
    vol = float(np.prod(np.ptp(box, axis=1)))
    k = int(round(n_atoms ** (1.0 / n)))
    if k**n == n_atoms:
        g = Grid.on_box(box, k, 8)
        pts, w, owner = g.quadrature()
        dens = np.ones(len(pts)) if density is None else density(pts)
        mass = np.bincount(owner, weights=w * dens, minlength=g.size)
        P = g.points
    else:
        gen = rng(seed, 70)
        S = box[:, 0] + gen.random((samples, n)) * np.ptp(box, axis=1)
        if density is not None:
            keep = gen.random(samples) * np.max(density(S)) <= density(S)
            S = S[keep]
        P, lab = kmeans2(S, n_atoms, iter=50, minit="++", seed=np.random.default_rng(rng(seed, 71).integers(2**32)))
        mass = np.bincount(lab, minlength=n_atoms).astype(float)
        P, mass = P[mass > 0], mass[mass > 0]
    mass = mass / mass.sum()
    mass[-1] = 1.0 - mass[:-1].sum()
    rho_bar = np.full(len(P), 1.0 / vol) if density is None else density(P) / _normaliser(box, density)
    return TargetAtoms(P, mass, rho_bar)


def _normaliser(box, density) -> float:
    g = Grid.on_box(box, 64 if len(box) <= 2 else 16, 1)
    return float(density(g.points).sum() * g.cell_volume)


# ---------------------------------------------------------------------- solver


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    masses: np.ndarray
    history: list = field(default_factory=list)


def shared_masses(S: np.ndarray, w: np.ndarray, band: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell masses from piece values S (points x atoms) and the max per point.

    A point whose top values tie within ``band`` gives an equal share of its weight to
    every tied cell, so symmetric instances with quadrature points on a cell boundary
    can still be balanced.
    """
    top = S.max(axis=1)
    tied = S >= (top - band)[:, None]
    share = w / tied.sum(axis=1)
    return share @ tied, top


class _Dual:
    """Chunked evaluation of cell masses and of the dual objective on fixed quadrature points."""

    def __init__(self, c: CostModel, pts: np.ndarray, w: np.ndarray, atoms: np.ndarray, band: float):
        self.w = w
        self.N = len(atoms)
        self.band = band
        self.chunks = [(s, min(s + CHUNK, len(pts))) for s in range(0, len(pts), CHUNK)]
        self.C = c.pairwise(pts, atoms, check=False)

    def evaluate(self, lam: np.ndarray):
        def one(se):
            s, e = se
            mass, top = shared_masses(lam[None, :] - self.C[s:e], self.w[s:e], self.band)
            return mass, float(self.w[s:e] @ top)

        parts = parallel_map(one, self.chunks)
        mass = np.zeros(self.N)
        integral = 0.0
        for m, t in parts:
            mass += m
            integral += t
        return mass, integral


def _ascent(dual: _Dual, nu: TargetAtoms, lam: np.ndarray, tol: float, max_iter: int, history: list):
    """Damped ascent lambda <- lambda + eta (nu - mass) with Barzilai-Borwein steps; a step that
    more than doubles the residual is rejected and eta halved."""
    mass, _ = dual.evaluate(lam)
    g = nu.masses - mass
    eta, it = 1.0, 0
    while np.max(np.abs(g)) > tol:
        if it >= max_iter:
            raise NoConvergence(f"dual ascent stopped at residual {np.max(np.abs(g)):.3g} after {it} iterations")
        it += 1
        trial = lam + eta * g
        m2, _ = dual.evaluate(trial)
        g2 = nu.masses - m2
        if np.max(np.abs(g2)) > 2.0 * np.max(np.abs(g)) and eta > 1e-14:
            eta *= 0.5
            continue
        s, y = trial - lam, g2 - g
        curv = -float(s @ y)
        eta = min(float(s @ s) / curv, 1e6) if curv > 1e-300 else 2.0 * eta
        lam, g, mass = trial, g2, m2
        history.append(float(np.max(np.abs(g))))
    return lam, mass, it


def _lbfgs(dual: _Dual, nu: TargetAtoms, lam: np.ndarray, tol: float, max_iter: int, history: list):
    def f(x):
        m, integral = dual.evaluate(x)
        g = nu.masses - m
        history.append(float(np.max(np.abs(g))))
        return -(float(nu.masses @ x) - integral), -g

    res = minimize(f, lam, jac=True, method="L-BFGS-B",
                   options={"gtol": tol, "ftol": 0.0, "maxiter": max_iter, "maxcor": 20})
    mass, _ = dual.evaluate(res.x)
    return res.x, mass, int(res.nit)


def solve_semidiscrete(c: CostModel, mu: SourceMeasure, nu: TargetAtoms, tol: float = 1e-3,
                       max_iter: int = 5000, audit: bool = True, return_info: bool = False,
                       method: str = "lbfgs"):
    """Offsets lambda_j with |mass(cell_j) - nu_j| <= tol for every j.

    Maximises the concave dual Phi(lambda) = <nu, lambda> - int u_lambda d mu, whose
    gradient is nu - masses. ``method="lbfgs"`` runs limited-memory quasi-Newton on that
    gradient and finishes with damped ascent if needed; ``method="ascent"`` uses damped
    ascent alone. The returned u is a maximum of c-functions, hence c-convex, with
    offsets of mean zero.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    if method not in ("lbfgs", "ascent"):
        raise ConfigError(f"unknown solver method {method!r}")
    mu.check_inside(c)
    nu.check_inside(c)
    if audit:
        rep = audit_structure(c, 64, 0)
        if not rep.passed:
            raise ConfigError(f"cost fails the structure audit: {rep.witness}")
    pts, w, _ = mu.quadrature()
    if np.min(nu.masses) < np.max(w):
        raise MassMismatch("grid too coarse: an atom mass is below one quadrature cell")
    dual = _Dual(c, pts, w, nu.points, DEFAULT_TOL.boundary_band)
    history: list = []
    lam = np.zeros(len(nu))
    it = 0
    if method == "lbfgs":
        lam, mass, it = _lbfgs(dual, nu, lam, tol, max_iter, history)
    else:
        mass, _ = dual.evaluate(lam)
    if np.max(np.abs(nu.masses - mass)) > tol:
        lam, mass, k = _ascent(dual, nu, lam, tol, max_iter - it, history)
        it += k
    lam = lam - lam.mean()
    u = SemidiscretePotential(c, nu.points.copy(), lam)
    if return_info:
        return u, SolveInfo(it, float(np.max(np.abs(nu.masses - mass))), mass, history)
    return u


def cell_assignment(u: SemidiscretePotential, grid: Grid) -> np.ndarray:
    """Index of the active piece at every cell centre of grid."""
    _, arg = u.evaluate(grid.points, return_index=True)
    return arg


def transport_map(c: CostModel, u: SemidiscretePotential, x, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Focus of the unique active piece at x, which is cexp_x(Du(x)) inside an open cell."""
    x = np.asarray(x, dtype=float)
    vals = u.piece_values(x[None, :])[0]
    order = np.argsort(-vals, kind="stable")
    if len(vals) > 1 and vals[order[0]] - vals[order[1]] <= tol.boundary_band:
        raise NondifferentiablePoint(f"{x} lies on a cell boundary")
    return u.foci[order[0]].copy()


# ---------------------------------------------------------------------- mass checks


@dataclass
class AleksandrovMassReport:
    ratios: np.ndarray
    nu_mass: np.ndarray
    mu_mass: np.ndarray
    volumes: np.ndarray
    alpha: tuple
    worst_low: float
    worst_high: float

    @property
    def mass_ok(self) -> bool:
        """nu(image of A) >= mu(A) for every region (touched cells cover A)."""
        return bool(np.all(self.nu_mass >= self.mu_mass - 1e-12))

    def to_dict(self) -> dict:
        return {"ratios": self.ratios.tolist(), "nu_mass": self.nu_mass.tolist(),
                "mu_mass": self.mu_mass.tolist(), "volumes": self.volumes.tolist(),
                "alpha": list(self.alpha), "worst_low": self.worst_low, "worst_high": self.worst_high,
                "mass_ok": self.mass_ok}


def aleksandrov_mass_check(c: CostModel, u: SemidiscretePotential, mu: SourceMeasure, nu: TargetAtoms,
                           regions) -> AleksandrovMassReport:
    """Volume ratio |image of A| / |A cap spt rho| for each region, in the quantized-density normalisation.

    The image volume of A is sum over atoms whose cell meets A of nu_j / rho_bar_j, so a
    uniform/uniform pair has alpha_1 = alpha_2 = rho / rho_bar. Regions are Region
    objects or coverage arrays on the source grid.
    """
    pts, w, owner = mu.quadrature()
    _, arg = u.evaluate(pts, return_index=True)
    rho_bar = nu.density if nu.density is not None else np.ones(len(nu))
    vols, ratios, nm, mm = [], [], [], []
    for A in regions:
        cov = A.coverage if isinstance(A, Region) else np.asarray(A, dtype=float).ravel()
        cw = cov[owner]
        touched = np.zeros(len(nu), dtype=bool)
        touched[np.unique(arg[cw > 0])] = True
        vol = float(np.sum(cov * (mu.density > 0)) * mu.grid.cell_volume)
        img = float(np.sum(nu.masses[touched] / rho_bar[touched]))
        vols.append(vol)
        ratios.append(img / vol if vol > 0 else np.nan)
        nm.append(float(nu.masses[touched].sum()))
        mm.append(float(np.sum(w * cw)))
    a1, a2 = mu.alpha
    rb = rho_bar
    alpha = (a1 / float(rb.max()), a2 / float(rb.min()))
    r = np.array(ratios)
    return AleksandrovMassReport(r, np.array(nm), np.array(mm), np.array(vols), alpha,
                                 float(np.nanmin(r)), float(np.nanmax(r)))


def pushforward_defect(c: CostModel, u: SemidiscretePotential, mu: SourceMeasure, nu: TargetAtoms,
                       max_degree: int = 2) -> dict:
    """|sum nu_j eta(x̄_j) - int eta(T) d mu| / max|eta| for coordinate monomials eta up to max_degree.

    Quadrature points inside the boundary band are shared between the tied cells, as in the solver.
    """
    pts, w, _ = mu.quadrature()
    mass, _ = shared_masses(u.piece_values(pts), w, DEFAULT_TOL.boundary_band)
    n = c.n
    exps = [e for e in np.ndindex(*(max_degree + 1,) * n) if 0 < sum(e) <= max_degree]
    out = {}
    for e in exps:
        vals = np.prod(nu.points ** np.asarray(e), axis=1)
        top = max(float(np.max(np.abs(vals))), 1e-300)
        out["x^" + "".join(map(str, e))] = float(abs((nu.masses - mass) @ vals)) / top
    return out


# ---------------------------------------------------------------------- refinement study


def _cell_diameters(points: np.ndarray, arg: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(k)
    for j in range(k):
        P = points[arg == j]
        if len(P) < 2:
            continue
        H = convex_hull(P)
        out[j] = float(pdist(H.vertices).max()) if len(H.vertices) > 1 else 0.0
    return out


@dataclass
class RefinementReport:
    Ns: list
    max_diameter: list
    bijective: list
    boundary_fraction: list
    iterations: list
    monotone: bool
    disclaimer: str = DISCLAIMER

    @property
    def passed(self) -> bool:
        return self.monotone and all(self.bijective)

    def to_dict(self) -> dict:
        return {"Ns": self.Ns, "max_diameter": self.max_diameter, "bijective": self.bijective,
                "boundary_fraction": self.boundary_fraction, "iterations": self.iterations,
                "monotone": self.monotone, "passed": self.passed, "disclaimer": self.disclaimer}


def regularity_refinement_study(c: CostModel, mu: SourceMeasure, target_box, Ns, seed: int = 0,
                                target_density=None, tol: float = 1e-3, max_iter: int = 5000,
                                slack: float = 0.10, tolerances: Tolerances = DEFAULT_TOL,
                                method: str = "lbfgs") -> RefinementReport:
    """Solve for each N in Ns and record the largest cell diameter and the cell-to-atom bijection."""
    pts, w, _ = mu.quadrature()
    diam, bij, bfrac, iters = [], [], [], []
    for N in Ns:
        nu = quantize(target_box, int(N), seed, target_density)
        u, info = solve_semidiscrete(c, mu, nu, tol, max_iter, audit=False, return_info=True, method=method)
        vals = u.piece_values(pts)
        arg = np.argmax(vals, axis=1)
        top = vals[np.arange(len(pts)), arg]
        vals[np.arange(len(pts)), arg] = -np.inf
        band = (top - vals.max(axis=1) <= tolerances.boundary_band) if len(nu) > 1 else np.zeros(len(pts), bool)
        counts = np.bincount(arg, minlength=len(nu))
        d = _cell_diameters(pts, arg, len(nu))
        diam.append(float(d.max()))
        bij.append(bool(np.all(counts > 0)))
        bfrac.append(float(w[band].sum()))
        iters.append(int(info.iterations))
    mono = all(diam[i + 1] <= diam[i] * (1 + slack) for i in range(len(diam) - 1))
    return RefinementReport([int(N) for N in Ns], diam, bij, bfrac, iters, mono)
