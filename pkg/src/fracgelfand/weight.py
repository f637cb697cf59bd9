"""Even, radially nonincreasing weights K and their admissibility checks.

Three families are supported:

* ``constant``       K(x) = c
* ``polynomial``     K(x) = (1 + x^2)^(-a)
* ``stretched_exp``  K(x) = exp(-beta |x|^(2m)), admissible only for m > 1/2

Everything the solver needs is available in closed form: K, sqrt(K),
log K and the half log-derivative W = (1/2) d/dx log K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .grid import HalfGrid

KINDS = ("constant", "polynomial", "stretched_exp")
_ALIASES = {"const": "constant", "poly": "polynomial", "stretched": "stretched_exp"}


class AssumptionViolation(ValueError):
    """A weight fails one of the admissibility hypotheses."""

    def __init__(self, report: "AssumptionReport"):
        super().__init__("weight violates admissibility: " + ", ".join(report.failures()))
        self.report = report


@dataclass(frozen=True)
class Weight:
    """An admissible weight, described by its family and parameters.

    Parameters
    ----------
    kind : str
        One of ``constant``, ``polynomial`` or ``stretched_exp`` (``const``
        and ``poly`` are accepted as aliases).
    c : float
        Level of the constant weight.
    a : float
        Exponent of the polynomial weight.
    beta, m : float
        Rate and half-exponent of the stretched exponential.
    """

    kind: str = "constant"
    c: float = 1.0
    a: float = 1.0
    beta: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        for name in ("c", "a", "beta", "m"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"weight parameter {name} must be finite")
            object.__setattr__(self, name, val)

    # -- evaluation -------------------------------------------------------
    def log_value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, math.log(self.c) if self.c > 0 else -math.inf)
        if self.kind == "polynomial":
            return -self.a * np.log1p(x * x)
        return -self.beta * np.abs(x) ** (2.0 * self.m)

    def value(self, x):
        return np.exp(self.log_value(x))

    def sqrt_value(self, x):
        return np.exp(0.5 * self.log_value(x))

    def dlog_half(self, x):
        """W(x) = (1/2) d/dx log K(x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "polynomial":
            return -self.a * x / (1.0 + x * x)
        p = 2.0 * self.m - 1.0
        with np.errstate(divide="ignore"):
            return -self.beta * self.m * np.sign(x) * np.abs(x) ** p

    def dsqrt(self, x):
        """d/dx sqrt(K(x))."""
        return self.sqrt_value(x) * self.dlog_half(x)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @property
    def peak(self) -> float:
        """K(0), which is also sup K."""
        return float(self.value(0.0))

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "c": self.c}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "a": self.a}
        return {"kind": "stretched_exp", "beta": self.beta, "m": self.m}

    @classmethod
    def from_dict(cls, d: dict) -> "Weight":
        d = dict(d)
        kind = d.pop("kind", "constant")
        allowed = {"constant": {"c"}, "polynomial": {"a"}, "stretched_exp": {"beta", "m"}}
        kind_n = _ALIASES.get(kind, kind)
        if kind_n not in allowed:
            raise ValueError(f"unknown weight kind {kind!r}")
        extra = set(d) - allowed[kind_n]
        if extra:
            raise ValueError(f"unknown keys for weight {kind_n}: {sorted(extra)}")
        return cls(kind=kind_n, **d)


def constant(c: float = 1.0) -> Weight:
    return Weight("constant", c=c)


def polynomial(a: float) -> Weight:
    return Weight("polynomial", a=a)


def stretched_exp(beta: float, m: float) -> Weight:
    return Weight("stretched_exp", beta=beta, m=m)


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    detail: str = ""
    node: Optional[float] = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "detail": self.detail, "node": self.node}


@dataclass(frozen=True)
class AssumptionReport:
    """Per-hypothesis outcome of :func:`validate_assumption_a`."""

    weight: Weight
    checks: Dict[str, CheckResult] = field(default_factory=dict)
    sup_dsqrt: float = 0.0
    argmax_dsqrt: float = 0.0

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self):
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "weight": self.weight.to_dict(),
            "ok": self.ok,
            "sup_dsqrt": self.sup_dsqrt,
            "argmax_dsqrt": self.argmax_dsqrt,
            "checks": {k: c.to_dict() for k, c in self.checks.items()},
        }


def _first_bad(mask, x) -> Optional[float]:
    idx = np.flatnonzero(mask)
    return float(x[idx[0]]) if idx.size else None


def validate_assumption_a(k: Weight, grid: HalfGrid) -> AssumptionReport:
    """Check positivity, parity, monotonicity and a bounded d/dx sqrt(K).

    The checks are sampled on the grid nodes plus their midpoints.  The
    parameter gates (c > 0, a >= 0, beta > 0, m > 1/2) are checked first.
    """
    checks: Dict[str, CheckResult] = {}
    if k.kind == "constant":
        checks["parameters"] = CheckResult(k.c > 0, f"c = {k.c}")
    elif k.kind == "polynomial":
        checks["parameters"] = CheckResult(k.a >= 0, f"a = {k.a}")
    else:
        ok = k.beta > 0 and k.m > 0.5
        checks["parameters"] = CheckResult(ok, f"beta = {k.beta}, m = {k.m} (needs beta > 0, m > 1/2)")

    nodes = grid.nodes
    x = np.sort(np.concatenate([nodes, 0.5 * (nodes[:-1] + nodes[1:])]))
    with np.errstate(all="ignore"):
        kv = k.value(x)
        km = k.value(-x)
        ds = k.dsqrt(x)
        xw = x * k.dlog_half(x)

    bad = ~(kv > 0)
    checks["positive"] = CheckResult(not bad.any(), "K > 0", _first_bad(bad, x))
    bad = kv != km
    checks["even"] = CheckResult(not bad.any(), "K(-x) = K(x)", _first_bad(bad, x))
    bad = np.diff(kv) > 0
    checks["nonincreasing"] = CheckResult(not bad.any(), "K nonincreasing in |x|", _first_bad(bad, x[1:]))

    finite = np.isfinite(ds)
    if finite.all():
        i = int(np.argmax(np.abs(ds)))
        sup, arg = float(abs(ds[i])), float(x[i])
    else:
        sup, arg = math.inf, _first_bad(~finite, x)
    # a stretched exponential with m < 1/2 has a cusp at 0 that sampling can miss
    bounded = math.isfinite(sup) and not (k.kind == "stretched_exp" and k.m < 0.5)
    checks["bounded_dsqrt"] = CheckResult(bounded, f"sup |d sqrt K| = {sup:.6g}", None if bounded else arg)
    bad = xw > 0
    checks["x_dlog_nonpositive"] = CheckResult(not bad.any(), "x W(x) <= 0", _first_bad(bad, x))
    return AssumptionReport(k, checks, sup, arg)


def slow_decay_class(k: Weight) -> bool:
    """True when exp(mu |x|) K is non-integrable for every mu > 0."""
    if k.kind in ("constant", "polynomial"):
        return True
    return k.m < 0.5
