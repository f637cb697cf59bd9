"""Even/odd sampled profiles on a truncated half-line grid.

Only x >= 0 is stored.  Profiles extend to x < 0 by parity and vanish for
|x| > L.  A grid is either uniform or sinh-mapped: x = a sinh(xi / a) with
xi uniform, which is uniform near the core and geometric in the tail.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._moments import kernel_weights


@dataclass(frozen=True, eq=False)
class HalfGrid:
    """Nodes 0 = x_0 < ... < x_n = L.

    ``stretch`` is None for a uniform grid, else the sinh scale a.  ``h`` is
    the uniform step in the computational variable (equal to the node
    spacing when uniform).
    """

    L: float
    n: int
    stretch: Optional[float]
    nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        if self.stretch is None:
            return self.L / self.n
        return self.stretch * math.asinh(self.L / self.stretch) / self.n

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def weights(self) -> np.ndarray:
        """Half-line trapezoid weights (in the computational variable when mapped)."""
        if self.stretch is None:
            w = np.full(self.n + 1, self.h)
        else:
            xi = self.stretch * np.arcsinh(self.nodes / self.stretch)
            w = self.h * np.cosh(xi / self.stretch)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def same_as(self, other: "HalfGrid") -> bool:
        return self is other or (self.n == other.n and np.array_equal(self.nodes, other.nodes))

    def scaled(self, factor: float) -> "HalfGrid":
        """The grid with every node multiplied by ``factor``."""
        a = None if self.stretch is None else self.stretch * factor
        nodes = self.nodes * factor
        nodes.setflags(write=False)
        return HalfGrid(self.L * factor, self.n, a, nodes)

    def subsampled(self, stride: int) -> "HalfGrid":
        if self.n % stride:
            raise ValueError(f"stride {stride} does not divide n={self.n}")
        nodes = self.nodes[::stride].copy()
        nodes.setflags(write=False)
        return HalfGrid(self.L, self.n // stride, self.stretch, nodes)

    def to_dict(self) -> dict:
        return {"L": self.L, "n": self.n, "stretch": self.stretch}

    @classmethod
    def from_dict(cls, d: dict) -> "HalfGrid":
        if d.get("stretch") is None:
            return make_grid(d["L"], d["n"])
        return make_mapped_grid(d["L"], d["n"], d["stretch"])


def make_grid(L: float, n: int) -> HalfGrid:
    """Uniform half-grid with ``n`` cells on [0, L]."""
    _check_sizes(L, n)
    nodes = np.arange(n + 1) * (L / n)
    nodes[-1] = L
    nodes.setflags(write=False)
    return HalfGrid(float(L), int(n), None, nodes)


def make_mapped_grid(L: float, n: int, stretch: float) -> HalfGrid:
    """Half-grid with nodes a*sinh(xi_i/a), xi uniform, x_n = L."""
    _check_sizes(L, n)
    if not stretch > 0:
        raise ValueError(f"stretch must be positive, got {stretch!r}")
    a = float(stretch)
    xi = np.arange(n + 1) * (a * math.asinh(L / a) / n)
    nodes = a * np.sinh(xi / a)
    nodes[0] = 0.0
    nodes[-1] = L
    nodes.setflags(write=False)
    return HalfGrid(float(L), int(n), a, nodes)


def _check_sizes(L, n):
    if not (isinstance(L, (int, float, np.floating)) and math.isfinite(L) and L > 0):
        raise ValueError(f"half-length must be positive and finite, got {L!r}")
    if int(n) != n or n < 16:
        raise ValueError(f"cell count must be an integer >= 16, got {n!r}")


def _frozen(samples) -> np.ndarray:
    arr = np.array(samples, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EvenProfile:
    """Samples at x >= 0 of an even function; zero beyond L.

    ``density`` tags nonnegative profiles such as rho = v^2.
    """

    grid: HalfGrid
    samples: np.ndarray
    density: bool = False

    def __post_init__(self):
        arr = _frozen(self.samples)
        if arr.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} samples, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("profile samples must be finite")
        if self.density and np.any(arr < 0):
            raise ValueError("density profile has negative samples")
        object.__setattr__(self, "samples", arr)

    parity = "even"

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def tail_ratio(self) -> float:
        peak = np.max(np.abs(self.samples))
        return 0.0 if peak == 0 else abs(self.samples[-1]) / peak

    def with_samples(self, samples, density: bool = False) -> "EvenProfile":
        return EvenProfile(self.grid, samples, density)

    def to_csv(self) -> str:
        return _profile_csv(self)

    def to_json(self) -> str:
        return _profile_json(self)


@dataclass(frozen=True, eq=False)
class OddProfile:
    """Samples at x >= 0 of an odd function; samples[0] is exactly 0."""

    grid: HalfGrid
    samples: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.samples)
        if arr.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} samples, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("profile samples must be finite")
        if arr[0] != 0.0:
            raise ValueError("odd profile must vanish at x = 0")
        object.__setattr__(self, "samples", arr)

    parity = "odd"

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def to_csv(self) -> str:
        return _profile_csv(self)

    def to_json(self) -> str:
        return _profile_json(self)


def _profile_csv(p) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "value"])
    for x, y in zip(p.grid.nodes, p.samples):
        w.writerow([repr(float(x)), repr(float(y))])
    return buf.getvalue()


def _profile_json(p) -> str:
    return json.dumps(
        {
            "parity": p.parity,
            "density": bool(getattr(p, "density", False)),
            "grid": p.grid.to_dict(),
            "samples": [float(y) for y in p.samples],
        }
    )


def profile_from_json(text: str):
    d = json.loads(text)
    grid = HalfGrid.from_dict(d["grid"])
    if d["parity"] == "odd":
        return OddProfile(grid, d["samples"])
    return EvenProfile(grid, d["samples"], d.get("density", False))


def profile_from_csv(text: str, grid: HalfGrid) -> EvenProfile:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["x", "value"]:
        raise ValueError(f"unexpected header {rows[0]}")
    xs = np.array([float(r[0]) for r in rows[1:]])
    if xs.shape != grid.nodes.shape or not np.allclose(xs, grid.nodes, rtol=1e-12, atol=0):
        raise ValueError("CSV abscissae do not match the grid")
    return EvenProfile(grid, [float(r[1]) for r in rows[1:]])


@dataclass(frozen=True)
class XAlphaNorm:
    l2: float
    weighted_l2: float
    sup: float

    @property
    def total(self) -> float:
        return self.l2 + self.weighted_l2 + self.sup


def integrate(p: EvenProfile) -> float:
    """∫_R p over the even extension (half-line trapezoid, doubled)."""
    return 2.0 * float(p.grid.weights @ p.samples)


def xalpha_norm(p: EvenProfile, order) -> XAlphaNorm:
    """||v||_L2, || |x|^alpha v ||_L2 and ||v||_Linf of the even extension.

    The weighted part integrates |x|^(2 alpha) exactly against the linear
    interpolant of v^2.
    """
    sq = p.samples**2
    l2 = math.sqrt(max(integrate(p.with_samples(sq)), 0.0))
    wts = kernel_weights([0.0], p.grid.nodes, 2.0 * order.alpha, odd=False, reflected=False, scheme="linear")[0]
    weighted = math.sqrt(max(2.0 * float(wts @ sq), 0.0))
    return XAlphaNorm(l2=l2, weighted_l2=weighted, sup=float(np.max(np.abs(p.samples))))


def interp(p, x, kind: str = "linear"):
    """Evaluate a profile at ``x`` with its parity extension; 0 for |x| > L.

    ``kind`` is "linear" or "quadratic" (Lagrange on consecutive cell
    pairs, needs an even cell count).
    """
    xq = np.asarray(x, dtype=float)
    ax = np.abs(xq)
    nodes = p.grid.nodes
    y = p.samples
    inside = ax <= p.grid.L
    axc = np.clip(ax, 0.0, p.grid.L)
    if kind == "linear":
        val = np.interp(axc, nodes, y)
    elif kind == "quadratic":
        if p.grid.n % 2:
            raise ValueError("quadratic interpolation needs an even cell count")
        k = np.clip(np.searchsorted(nodes, axc, side="right") - 1, 0, p.grid.n - 1)
        k0 = (k // 2) * 2
        x0, x1, x2 = nodes[k0], nodes[k0 + 1], nodes[k0 + 2]
        y0, y1, y2 = y[k0], y[k0 + 1], y[k0 + 2]
        val = (
            y0 * (axc - x1) * (axc - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (axc - x0) * (axc - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (axc - x0) * (axc - x1) / ((x2 - x0) * (x2 - x1))
        )
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    val = np.where(inside, val, 0.0)
    if p.parity == "odd":
        val = np.sign(xq) * val
    return float(val) if np.ndim(x) == 0 else val


def sample(grid: HalfGrid, fn, density: bool = False) -> EvenProfile:
    """Sample a callable at the grid nodes."""
    return EvenProfile(grid, fn(grid.nodes), density)
