"""Report records shared by the sampled checks and estimate checkers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Any

import numpy as np

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


@dataclass
class ConditionReport:
    name: str
    verdict: str
    extremal: float
    witness: dict[str, Any] = field(default_factory=dict)
    n_samples: int = 0
    seed: int = 0
    tol: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class EstimateReport:
    """lhs/rhs of a pointwise estimate with the implied constant ``lhs / rhs``."""

    name: str
    lhs: float
    rhs: float
    config: dict[str, Any] = field(default_factory=dict)
    resolution: int = 0
    seed: int = 0
    flags: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def c_impl(self) -> float:
        if self.rhs == 0.0:
            return float("inf") if self.lhs > 0 else float("nan")
        return self.lhs / self.rhs

    @property
    def degenerate(self) -> bool:
        return "degenerate" in self.flags

    def to_dict(self) -> dict:
        d = _clean(asdict(self))
        d["c_impl"] = float(self.c_impl)
        return d
