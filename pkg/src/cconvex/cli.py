"""Batch command-line front end.

Every subcommand reads a JSON run configuration, writes CSV/JSON artifacts into the
output directory and prints a short summary. Each artifact carries the config hash and
the seed. Exit status: 0 when every verdict passes, 1 on a failed verdict or a numerical
failure, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cfunc import Grid
from .conditions import check_condition, check_glp, estimate_fpp_constant, estimate_qconv_M
from .config import Tolerances, config_hash
from .cost import CostModel
from .errors import CConvexError, ConfigError
from .estimates import estimate_sweep, estimates_csv
from .geometry import property_battery
from .reports import PASS
from .solver import (SourceMeasure, TargetAtoms, cell_assignment, quantize, regularity_refinement_study,
                     solve_semidiscrete)

COMMANDS = ("check-cost", "verify-estimates", "solve", "refine", "geometry-suite")
U64 = 2**64


# ---------------------------------------------------------------------- configuration


def _count(name: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
        raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
    return int(v)


def _seed(v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v < U64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {v!r}")
    return int(v)


def _positive(name: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v) or v <= 0:
        raise ConfigError(f"{name} must be a positive number, got {v!r}")
    return float(v)


def _from_dict(cls, d, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(d) - names)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class SolveSpec:
    """Semidiscrete instance: a density on a source box and atoms (explicit or quantized)."""

    source_box: list = field(default_factory=lambda: [[0.0, 1.0], [0.0, 1.0]])
    resolution: int | None = None
    density: list | None = None
    atoms: list | None = None
    masses: list | None = None
    target_box: list | None = None
    n_atoms: int = 16
    tol: float = 1e-3
    max_iter: int = 5000
    method: str = "lbfgs"

    def __post_init__(self):
        if self.resolution is not None:
            self.resolution = _count("solve.resolution", self.resolution)
        self.n_atoms = _count("solve.n_atoms", self.n_atoms)
        self.max_iter = _count("solve.max_iter", self.max_iter)
        self.tol = _positive("solve.tol", self.tol)
        if self.atoms is None and self.target_box is None:
            raise ConfigError("solve needs either atoms or a target_box to quantize")
        if self.masses is not None and self.atoms is None:
            raise ConfigError("solve.masses given without atoms")


@dataclass
class RefineSpec:
    source_box: list = field(default_factory=lambda: [[0.0, 1.0], [0.0, 1.0]])
    resolution: int | None = None
    target_box: list = field(default_factory=lambda: [[0.05, 0.95], [0.05, 0.95]])
    Ns: list = field(default_factory=lambda: [4, 16, 64])
    tol: float = 1e-3
    max_iter: int = 5000
    slack: float = 0.10

    def __post_init__(self):
        if self.resolution is not None:
            self.resolution = _count("refine.resolution", self.resolution)
        if not isinstance(self.Ns, list) or not self.Ns:
            raise ConfigError("refine.Ns must be a nonempty list")
        self.Ns = [_count("refine.Ns entry", N) for N in self.Ns]
        self.max_iter = _count("refine.max_iter", self.max_iter)
        self.tol = _positive("refine.tol", self.tol)
        if isinstance(self.slack, bool) or not isinstance(self.slack, (int, float)) or self.slack < 0:
            raise ConfigError("refine.slack must be a nonnegative number")


@dataclass
class GeometrySpec:
    cases: int = 200
    dim: int = 2

    def __post_init__(self):
        self.cases = _count("geometry.cases", self.cases)
        self.dim = _count("geometry.dim", self.dim)
        if self.dim < 2:
            raise ConfigError("geometry.dim must be at least 2")


@dataclass
class RunConfig:
    """Validated run configuration; ``out`` is excluded from the config hash."""

    cost: dict = field(default_factory=lambda: {"kind": "quadratic"})
    seed: int = 0
    samples: int = 2000
    instances: int = 10
    resolution: int = 32
    out: str = "out"
    tolerances: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    solve: SolveSpec | None = None
    refine: RefineSpec = field(default_factory=RefineSpec)
    geometry: GeometrySpec = field(default_factory=GeometrySpec)

    def __post_init__(self):
        self.seed = _seed(self.seed)
        self.samples = _count("samples", self.samples)
        self.instances = _count("instances", self.instances)
        self.resolution = _count("resolution", self.resolution)
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError("out must be a nonempty path string")
        if isinstance(self.solve, dict):
            self.solve = _from_dict(SolveSpec, self.solve, "solve")
        if isinstance(self.refine, dict):
            self.refine = _from_dict(RefineSpec, self.refine, "refine")
        if isinstance(self.geometry, dict):
            self.geometry = _from_dict(GeometrySpec, self.geometry, "geometry")
        bad = {k: v for k, v in self.expect.items() if v not in ("pass", "fail")}
        if bad:
            raise ConfigError(f"expect values must be 'pass' or 'fail': {bad}")
        self.tol_record()
        self.cost_model()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _from_dict(cls, d, "config")

    def tol_record(self) -> Tolerances:
        return _from_dict(Tolerances, self.tolerances, "tolerances")

    def cost_model(self) -> CostModel:
        if not isinstance(self.cost, dict):
            raise ConfigError("cost must be a JSON object")
        return CostModel.from_dict(self.cost)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return config_hash(d)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    d: dict = {}
    if path is not None:
        try:
            d = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    d.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(d)


# ---------------------------------------------------------------------- output helpers


def _csv_text(header, rows, cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.hash} seed={cfg.seed}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _json_text(payload: dict, cfg: RunConfig) -> str:
    body = {"config_hash": cfg.hash, "seed": cfg.seed, **payload}
    return json.dumps(body, sort_keys=True, indent=1, allow_nan=True) + "\n"


# ---------------------------------------------------------------------- subcommands


def cmd_check_cost(cfg: RunConfig, out: Path) -> bool:
    c = cfg.cost_model()
    tol = cfg.tol_record()
    n, s = cfg.samples, cfg.seed
    reps = [check_condition(c, k, n, s, tol) for k in ("A3w", "A3s", "NNCC")]
    reps.append(check_glp(c, n, s, tol))
    M_hat, qrep = estimate_qconv_M(c, n, s, tol)
    qrep.name = "QConv-M"
    reps.append(qrep)
    C_hat, frep = estimate_fpp_constant(c, n, s, tol, M_hat=M_hat)
    frep.name = "f''-C"
    reps.append(frep)
    rows, ok = [], True
    for r in reps:
        want = cfg.expect.get(r.name, "pass")
        match = r.verdict == want
        ok &= match
        rows.append((r.name, r.verdict, want, "yes" if match else "no", float(r.extremal), r.n_samples))
    header = ("condition", "verdict", "expected", "as_expected", "value", "n_samples")
    _write(out, "check_cost.csv", _csv_text(header, rows, cfg))
    _write(out, "check_cost.json", _json_text(
        {"cost": c.to_dict(), "M_hat": M_hat, "C_hat": C_hat, "reports": [r.to_dict() for r in reps]}, cfg))
    print(f"cost {c.label}  config {cfg.hash}  seed {cfg.seed}")
    for r in rows:
        print(f"  {r[0]:<8} {r[1]:<12} value={r[4] + 0.0: .6g}" + ("" if r[3] == "yes" else f"  (expected {r[2]})"))
    print(f"  M_hat = {M_hat:.3f}  C_hat = {C_hat:.3g}")
    return ok


def cmd_verify_estimates(cfg: RunConfig, out: Path) -> bool:
    c = cfg.cost_model()
    M_hat, _ = estimate_qconv_M(c, cfg.samples, cfg.seed, cfg.tol_record())
    rows = estimate_sweep(c, cfg.instances, cfg.seed, cfg.resolution, M_hat=M_hat)
    vals = np.array([r.c_impl for _, r in rows])
    good = np.isfinite(vals) & (vals > 0)
    text = f"# config_hash={cfg.hash} seed={cfg.seed}\n" + estimates_csv(rows)
    _write(out, "estimates.csv", text)
    summary = {"cost": c.to_dict(), "M_hat": M_hat, "n_reports": len(rows), "n_finite_positive": int(good.sum()),
               "c_impl_max": {name: float(max(r.c_impl for _, r in rows if r.name == name))
                              for name in sorted({r.name for _, r in rows})}}
    _write(out, "estimates.json", _json_text(summary, cfg))
    print(f"cost {c.label}  config {cfg.hash}  seed {cfg.seed}")
    print(f"  {int(good.sum())}/{len(rows)} reports with finite positive C_impl (M_hat = {M_hat:.3f})")
    for name, v in summary["c_impl_max"].items():
        print(f"  max C_impl {name}: {v:.4g}")
    return bool(good.all())


def _instance(cfg: RunConfig, spec: SolveSpec):
    res = spec.resolution or cfg.resolution
    if spec.density is None:
        mu = SourceMeasure.uniform(spec.source_box, res)
    else:
        mu = SourceMeasure(Grid.on_box(spec.source_box, res, 2), np.asarray(spec.density, dtype=float))
    if spec.atoms is not None:
        P = np.asarray(spec.atoms, dtype=float)
        nu = TargetAtoms.uniform(P) if spec.masses is None else TargetAtoms(P, np.asarray(spec.masses, dtype=float))
    else:
        nu = quantize(spec.target_box, spec.n_atoms, cfg.seed)
    return mu, nu


def cmd_solve(cfg: RunConfig, out: Path) -> bool:
    if cfg.solve is None:
        raise ConfigError("solve needs a 'solve' section in the config")
    c = cfg.cost_model()
    spec = cfg.solve
    mu, nu = _instance(cfg, spec)
    u, info = solve_semidiscrete(c, mu, nu, spec.tol, spec.max_iter, return_info=True, method=spec.method)
    arg = cell_assignment(u, mu.grid)
    payload = {"cost": c.to_dict(), "foci": u.foci.tolist(), "offsets": u.offsets.tolist(),
               "masses": nu.masses.tolist(), "cell_masses": info.masses.tolist(),
               "iterations": info.iterations, "residual": info.residual, "tol": spec.tol,
               "grid": {"lo": mu.grid.lo.tolist(), "hi": mu.grid.hi.tolist(), "shape": list(mu.grid.shape)}}
    _write(out, "potential.json", _json_text(payload, cfg))
    _write(out, "assignment.csv", _csv_text(("x_index", "atom_index"), enumerate(arg.tolist()), cfg))
    ok = info.residual <= spec.tol
    print(f"cost {c.label}  config {cfg.hash}  seed {cfg.seed}")
    print(f"  {len(nu)} atoms, {info.iterations} iterations, max mass residual {info.residual:.3g} (tol {spec.tol:g})")
    return ok


def cmd_refine(cfg: RunConfig, out: Path) -> bool:
    c = cfg.cost_model()
    spec = cfg.refine
    mu = SourceMeasure.uniform(spec.source_box, spec.resolution or cfg.resolution)
    rep = regularity_refinement_study(c, mu, spec.target_box, spec.Ns, cfg.seed, tol=spec.tol,
                                      max_iter=spec.max_iter, slack=spec.slack, tolerances=cfg.tol_record())
    rows = zip(rep.Ns, rep.max_diameter, ["yes" if b else "no" for b in rep.bijective],
               rep.boundary_fraction, rep.iterations)
    header = ("N", "max_diameter", "bijective", "boundary_fraction", "iterations")
    _write(out, "refine.csv", _csv_text(header, rows, cfg))
    _write(out, "refine.json", _json_text({"cost": c.to_dict(), **rep.to_dict()}, cfg))
    print(f"cost {c.label}  config {cfg.hash}  seed {cfg.seed}")
    for N, d, b in zip(rep.Ns, rep.max_diameter, rep.bijective):
        print(f"  N={N:<5d} max cell diameter {d:.4f}  bijective {b}")
    print(f"  monotone within {spec.slack:.0%}: {rep.monotone}")
    print(f"  note: {rep.disclaimer}")
    return rep.passed


def cmd_geometry_suite(cfg: RunConfig, out: Path) -> bool:
    spec = cfg.geometry
    rows = property_battery(cfg.seed, spec.cases, spec.dim)
    table = [(r["check"], r["case"], r["value"], "yes" if r["passed"] else "no") for r in rows]
    _write(out, "geometry.csv", _csv_text(("check", "case", "value", "passed"), table, cfg))
    print(f"geometry battery  dim {spec.dim}  config {cfg.hash}  seed {cfg.seed}")
    ok = True
    for name in dict.fromkeys(r["check"] for r in rows):
        sel = [r for r in rows if r["check"] == name]
        n_ok = sum(r["passed"] for r in sel)
        ok &= n_ok == len(sel)
        print(f"  {name:<14} {n_ok}/{len(sel)} pass  worst {max(r['value'] for r in sel):.3g}")
    return ok


HANDLERS = {"check-cost": cmd_check_cost, "verify-estimates": cmd_verify_estimates, "solve": cmd_solve,
            "refine": cmd_refine, "geometry-suite": cmd_geometry_suite}


# ---------------------------------------------------------------------- entry point


def _u64(s: str) -> int:
    try:
        v = int(s, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cconvex", description="c-convex geometry and optimal transport regularity experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=_u64, help="seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--resolution", type=int, help="grid resolution per axis (overrides the config)")
    p.add_argument("--samples", type=int, help="sample count for sampled checks (overrides the config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out": args.out, "resolution": args.resolution,
                                        "samples": args.samples})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        ok = HANDLERS[args.command](cfg, Path(cfg.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CConvexError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not ok:
        print(f"{args.command}: verdict failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
