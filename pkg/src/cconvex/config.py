"""Centralized numerical tolerances and seeded random streams."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    # geometry
    facet: float = 1e-9
    inclusion: float = 1e-7
    mvee: float = 1e-8
    mvee_max_iter: int = 10000
    dual_box: float = 1e4
    # cexp / Newton
    newton_residual: float = 1e-10
    newton_max_iter: int = 100
    newton_retries: int = 10
    roundtrip: float = 1e-8
    outside: float = 1e-7
    # conditions
    a3w: float = 1e-5
    a3s_delta: float = 1e-4
    glp: float = 1e-7
    qconv: float = 1e-9
    # c-functions and grids
    active: float = 1e-9
    sublevel: float = 1e-9
    contact_band: float = 1e-7
    boundary_band: float = 1e-7
    degenerate_det: float = 1e-12

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_TOL = Tolerances()


def rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``.

    Streams are independent of evaluation order, so sweeps give identical
    results whatever the thread count.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("CCX_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over ``items`` using up to ``CCX_THREADS`` workers."""
    items = list(items)
    workers = n_threads()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)!r}")
