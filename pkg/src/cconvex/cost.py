"""Cost functions on box charts with analytic derivatives and structural audits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import DEFAULT_TOL, Tolerances, parallel_map, rng
from .errors import ConfigError, DegeneratePair, SingularPair
from .reports import FAIL, PASS, ConditionReport

KINDS = ("bilinear", "quadratic", "power", "inverse_square")
SINGULAR_KINDS = ("power", "inverse_square")


@dataclass(frozen=True)
class CrossHessian:
    """The matrix -D Dbar c(x, xbar), entry [i, j] = -d^2 c / dx_i dxbar_j."""

    matrix: np.ndarray
    det: float
    cond: float


class Derivatives(NamedTuple):
    value: float
    Dc: np.ndarray
    Dbarc: np.ndarray
    cross: CrossHessian


def _box(b, n: int | None = None) -> np.ndarray:
    arr = np.asarray(b, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError("a box is a list of [lo, hi] pairs")
    if n is not None and arr.shape[0] != n:
        raise ConfigError("box dimension mismatch")
    if not np.all(arr[:, 1] > arr[:, 0]):
        raise ConfigError("box must have positive volume")
    return arr


def box_distance(a: np.ndarray, b: np.ndarray) -> float:
    gap = np.maximum(0.0, np.maximum(a[:, 0] - b[:, 1], b[:, 0] - a[:, 1]))
    return float(np.linalg.norm(gap))


@dataclass(frozen=True, eq=False)
class CostModel:
    """c(x, xbar) of one of the built-in kinds on boxes ``omega`` (x) and ``omega_bar`` (xbar).

    Radial kinds are c = phi(|x - xbar|) with phi(r) = r^2/2 (quadratic),
    r^-2 (inverse_square) and, for the power kind, phi(r) = -r^p / p
    (``power_form="normalized"``, the sign under which the exponents in (-2, 1)
    are MTW-regular) or phi(r) = r^p (``power_form="literal"``).
    Bilinear is c = -<x, xbar>.
    """

    kind: str
    omega: np.ndarray
    omega_bar: np.ndarray
    p: float | None = None
    singular_separation: float = 0.0
    fd_step: float = 1e-4
    power_form: str = "normalized"
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown cost kind {self.kind!r}")
        object.__setattr__(self, "omega", _box(self.omega))
        object.__setattr__(self, "omega_bar", _box(self.omega_bar, self.omega.shape[0]))
        if self.kind == "power":
            if self.p is None:
                raise ConfigError("power cost needs an exponent p")
            p = float(self.p)
            if not ((-2 < p < 1) or p > 1):
                raise ConfigError("power exponent must lie in (-2,1) or (1,inf)")
            object.__setattr__(self, "p", p)
            if self.power_form not in ("normalized", "literal"):
                raise ConfigError("power_form must be 'normalized' or 'literal'")
        elif self.p is not None:
            raise ConfigError(f"exponent p is only meaningful for the power kind")
        if self.kind in SINGULAR_KINDS:
            gap = box_distance(self.omega, self.omega_bar)
            sep = self.singular_separation or 0.5 * gap
            if not (0 < sep <= gap):
                raise ConfigError(
                    f"singular cost needs separated boxes (box distance {gap:.3g}, separation {sep:.3g})")
            object.__setattr__(self, "singular_separation", float(sep))
        if self.fd_step <= 0:
            raise ConfigError("fd_step must be positive")

    # ------------------------------------------------------------------ construction

    @classmethod
    def make(cls, kind: str, n: int = 2, p: float | None = None, omega=None, omega_bar=None, **kw):
        """Cost with default boxes: [0,1]^n for both sides, or [0,1]^n and [3,4]^n for singular kinds."""
        if omega is None:
            omega = [[0.0, 1.0]] * n
        if omega_bar is None:
            omega_bar = [[3.0, 4.0]] * n if kind in SINGULAR_KINDS else [[0.0, 1.0]] * n
        return cls(kind=kind, omega=omega, omega_bar=omega_bar, p=p, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "CostModel":
        allowed = {"kind", "p", "omega", "omega_bar", "fd_step", "singular_separation", "n", "power_form"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown cost keys: {sorted(extra)}")
        if "kind" not in d:
            raise ConfigError("cost needs a kind")
        kw = {k: d[k] for k in ("fd_step", "singular_separation", "power_form") if k in d}
        return cls.make(d["kind"], n=int(d.get("n", 2)), p=d.get("p"), omega=d.get("omega"),
                        omega_bar=d.get("omega_bar"), **kw)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "omega": self.omega.tolist(), "omega_bar": self.omega_bar.tolist(),
             "fd_step": self.fd_step}
        if self.p is not None:
            d["p"] = self.p
            d["power_form"] = self.power_form
        if self.kind in SINGULAR_KINDS:
            d["singular_separation"] = self.singular_separation
        return d

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    @property
    def flat(self) -> bool:
        """True when every cross Hessian is the identity (bilinear and quadratic)."""
        return self.kind in ("bilinear", "quadratic")

    @property
    def label(self) -> str:
        if self.kind == "power":
            return f"power(p={self.p:g})" if self.power_form == "normalized" else f"power_literal(p={self.p:g})"
        return self.kind

    # ------------------------------------------------------------------ radial profile

    def _phi(self, r, order: int):
        if self.kind == "quadratic":
            return (0.5 * r**2, r, np.ones_like(r))[order]
        if self.kind == "inverse_square":
            p, k = -2.0, 1.0
        else:
            p = self.p
            k = -1.0 / p if self.power_form == "normalized" else 1.0
        if order == 0:
            return k * r**p
        if order == 1:
            return k * p * r ** (p - 1)
        return k * p * (p - 1) * r ** (p - 2)

    def _check(self, r):
        if self.kind in SINGULAR_KINDS and np.any(r < self.singular_separation):
            raise SingularPair(f"|x - xbar| = {np.min(r):.3g} below separation {self.singular_separation:.3g}")

    # ------------------------------------------------------------------ evaluation (broadcasting)

    def value(self, x, xbar, check: bool = True):
        x = np.asarray(x, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        if self.kind == "bilinear":
            return -np.sum(x * xbar, axis=-1)
        r = np.linalg.norm(x - xbar, axis=-1)
        if check:
            self._check(r)
        return self._phi(r, 0)

    def pairwise(self, X, Y, check: bool = True) -> np.ndarray:
        """Matrix C[i, j] = c(X[i], Y[j])."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.kind == "bilinear":
            return -X @ Y.T
        sq = np.sum(X**2, 1)[:, None] + np.sum(Y**2, 1)[None, :] - 2.0 * X @ Y.T
        r = np.sqrt(np.maximum(sq, 0.0))
        if check:
            self._check(r)
        if self.kind == "quadratic":
            return 0.5 * np.maximum(sq, 0.0)
        return self._phi(r, 0)

    def grad_x(self, x, xbar, check: bool = True):
        """Dc: derivative in x."""
        x = np.asarray(x, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        if self.kind == "bilinear":
            return -np.broadcast_to(xbar, np.broadcast_shapes(x.shape, xbar.shape)).copy()
        d = x - xbar
        r = np.linalg.norm(d, axis=-1)
        if check:
            self._check(r)
        if self.kind == "quadratic":
            return d
        return (self._phi(r, 1) / r)[..., None] * d

    def grad_xbar(self, x, xbar, check: bool = True):
        """Dbar c: derivative in xbar."""
        x = np.asarray(x, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        if self.kind == "bilinear":
            return -np.broadcast_to(x, np.broadcast_shapes(x.shape, xbar.shape)).copy()
        return -self.grad_x(x, xbar, check)

    def hess_x(self, x, xbar, check: bool = True) -> np.ndarray:
        """Second derivative of c in x (single pair)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "bilinear":
            return np.zeros((self.n, self.n))
        return self._radial_hessian(x - np.asarray(xbar, dtype=float), check)

    def cross_matrix(self, x, xbar, check: bool = True) -> np.ndarray:
        """-D Dbar c at a single pair; rows index x, columns index xbar."""
        if self.flat:
            return np.eye(self.n)
        return self._radial_hessian(np.asarray(x, dtype=float) - np.asarray(xbar, dtype=float), check)

    def _radial_hessian(self, d: np.ndarray, check: bool) -> np.ndarray:
        r = float(np.linalg.norm(d))
        if check:
            self._check(r)
        if self.kind == "quadratic":
            return np.eye(self.n)
        u = d / r
        P = np.outer(u, u)
        return self._phi(r, 2) * P + (self._phi(r, 1) / r) * (np.eye(self.n) - P)

    def cross_many(self, x, xbar, check: bool = False) -> np.ndarray:
        """Batched cross Hessians, shape (k, n, n); also the batched x-Hessian for radial kinds."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xbar = np.atleast_2d(np.asarray(xbar, dtype=float))
        k = max(len(x), len(xbar))
        if self.flat:
            return np.broadcast_to(np.eye(self.n), (k, self.n, self.n)).copy()
        d = x - xbar
        r = np.linalg.norm(d, axis=-1)
        if check:
            self._check(r)
        u = d / r[:, None]
        P = u[:, :, None] * u[:, None, :]
        a = self._phi(r, 2)[:, None, None]
        b = (self._phi(r, 1) / r)[:, None, None]
        return a * P + b * (np.eye(self.n) - P)

    # ------------------------------------------------------------------ momenta

    def source_momentum(self, x, xbar, check: bool = True):
        """p_(x, xbar) = -Dbar c(x, xbar), a covector at xbar."""
        return -self.grad_xbar(x, xbar, check)

    def target_momentum(self, x, xbar, check: bool = True):
        """pbar_(x, xbar) = -Dc(x, xbar), a covector at x."""
        return -self.grad_x(x, xbar, check)

    # ------------------------------------------------------------------ domains

    def in_omega(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.omega[:, 0] - tol) & (x <= self.omega[:, 1] + tol), axis=-1)

    def in_omega_bar(self, xbar, tol: float = 0.0):
        xbar = np.asarray(xbar, dtype=float)
        return np.all((xbar >= self.omega_bar[:, 0] - tol) & (xbar <= self.omega_bar[:, 1] + tol), axis=-1)

    def box_violation(self, y, side: str) -> float:
        b = self.omega_bar if side == "target" else self.omega
        y = np.asarray(y, dtype=float)
        return float(np.max(np.maximum(0.0, np.maximum(b[:, 0] - y, y - b[:, 1]))))

    def sample_pairs(self, gen: np.random.Generator, k: int):
        x = self.omega[:, 0] + gen.random((k, self.n)) * np.ptp(self.omega, axis=1)
        xb = self.omega_bar[:, 0] + gen.random((k, self.n)) * np.ptp(self.omega_bar, axis=1)
        return x, xb

    def sample_omega(self, gen, k: int):
        return self.omega[:, 0] + gen.random((k, self.n)) * np.ptp(self.omega, axis=1)

    def sample_omega_bar(self, gen, k: int):
        return self.omega_bar[:, 0] + gen.random((k, self.n)) * np.ptp(self.omega_bar, axis=1)


# ---------------------------------------------------------------------- public operations


def derivatives(c: CostModel, x, xbar) -> Derivatives:
    """Value, Dc, Dbar c and the cross Hessian at (x, xbar), all analytic."""
    x = np.asarray(x, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    val = float(c.value(x, xbar))
    M = c.cross_matrix(x, xbar)
    return Derivatives(val, c.grad_x(x, xbar), c.grad_xbar(x, xbar),
                       CrossHessian(M, float(np.linalg.det(M)), float(np.linalg.cond(M))))


def fd_derivatives(c: CostModel, x, xbar, h: float | None = None):
    """Central finite differences at steps h and h/2 with Richardson extrapolation.

    Returns (Dc, Dbar c, cross). The mixed second derivative uses a step ten times larger.
    """
    x = np.asarray(x, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    h = c.fd_step if h is None else h
    n = c.n
    eye = np.eye(n)
    f = lambda a, b: float(c.value(a, b, check=False))

    def grads(s):
        gx = np.array([(f(x + s * e, xbar) - f(x - s * e, xbar)) / (2 * s) for e in eye])
        gb = np.array([(f(x, xbar + s * e) - f(x, xbar - s * e)) / (2 * s) for e in eye])
        return gx, gb

    def mixed(s):
        M = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                ei, ej = s * eye[i], s * eye[j]
                M[i, j] = (f(x + ei, xbar + ej) - f(x + ei, xbar - ej)
                           - f(x - ei, xbar + ej) + f(x - ei, xbar - ej)) / (4 * s * s)
        return -M

    g1, b1 = grads(h)
    g2, b2 = grads(h / 2)
    H = 10 * h
    m1, m2 = mixed(H), mixed(H / 2)
    return (4 * g2 - g1) / 3, (4 * b2 - b1) / 3, (4 * m2 - m1) / 3


def metric(c: CostModel, x, xbar, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Gram matrix of <v, w> = <E v, E w> with E the inverse of -Dbar D c."""
    M = c.cross_matrix(x, xbar)
    if abs(np.linalg.det(M)) < tol.degenerate_det:
        raise DegeneratePair("cross Hessian is singular")
    E = np.linalg.inv(M.T)
    G = E.T @ E
    return 0.5 * (G + G.T)


def _audit_chunk(args):
    c, seed, idx, k = args
    from .cexp import cexp_many

    gen = rng(seed, 0, idx)
    x, xb = c.sample_pairs(gen, k)
    x0 = c.sample_omega(gen, k)
    dets = np.linalg.det(c.cross_many(x, xb))
    twist = np.linalg.det(c.cross_many(x0, xb))
    err = np.full(k, np.inf)
    for i in range(k):
        try:
            back = cexp_many(c, x0[i], c.target_momentum(x0[i], xb[i])[None, :], "target")[0]
            err[i] = np.linalg.norm(back - xb[i])
        except Exception:  # the report carries failures
            pass
    return [(dets[i], twist[i], err[i], x[i], xb[i], x0[i]) for i in range(k)]


def audit_structure(c: CostModel, n_samples: int, seed: int, tol: Tolerances = DEFAULT_TOL) -> ConditionReport:
    """Sampled nondegeneracy and twist audit with Newton round trips."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    chunk = 250
    jobs = [(c, seed, i, min(chunk, n_samples - i * chunk)) for i in range((n_samples + chunk - 1) // chunk)]
    rows = [r for part in parallel_map(_audit_chunk, jobs) for r in part]
    dets = np.array([abs(r[0]) for r in rows])
    tdets = np.array([abs(r[1]) for r in rows])
    errs = np.array([r[2] for r in rows])
    i_det = int(np.argmin(dets))
    i_err = int(np.argmax(errs))
    ok = dets.min() >= tol.degenerate_det and tdets.min() >= tol.degenerate_det and errs.max() <= tol.roundtrip
    conds = np.linalg.cond(c.cross_many(np.array([r[3] for r in rows]), np.array([r[4] for r in rows])))
    return ConditionReport(
        name="structure",
        verdict=PASS if ok else FAIL,
        extremal=float(dets.min()),
        witness={"x": rows[i_det][3], "xbar": rows[i_det][4]},
        n_samples=n_samples,
        seed=seed,
        tol=tol.degenerate_det,
        extra={"min_abs_det": float(dets.min()), "min_twist_det": float(tdets.min()),
               "max_roundtrip_error": float(errs.max()),
               "worst_roundtrip": {"x0": rows[i_err][5], "xbar": rows[i_err][4]},
               "max_cond": float(conds.max())},
    )
