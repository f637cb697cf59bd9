"""Conjugate Riesz potential and the cumulative exponent integral.

For an even profile f on the half-grid,

    (H_a f)(x) = d_a ∫_R sgn(x-y) |x-y|^(2a-1) f(y) dy                  (odd)
    w(x)       = -c_a ∫_R (|x-y|^(2a) - |y|^(2a)) f(y) dy = -∫_0^x H_a f  (even)

Both are applied as dense matrices whose entries integrate the kernel
exactly against the interpolant of f (product integration), so the weak
singularity at y = x needs no special handling.
"""

from __future__ import annotations

import csv
import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._moments import kernel_weights
from .grid import EvenProfile, HalfGrid, OddProfile
from .params import FractionalOrder


class GridMismatchError(ValueError):
    pass


def riesz_weights(targets, grid: HalfGrid, order: FractionalOrder, scheme: str) -> np.ndarray:
    """Rows of the H_a operator at arbitrary targets x >= 0."""
    p = 2.0 * order.alpha - 1.0
    direct = kernel_weights(targets, grid.nodes, p, odd=True, reflected=False, scheme=scheme)
    mirror = kernel_weights(targets, grid.nodes, p, odd=False, reflected=True, scheme=scheme)
    # sgn(x - y) = -sgn(t) for t = y - x; the mirrored half always has x + y > 0
    return order.d_alpha * (mirror - direct)


def potential_weights(targets, grid: HalfGrid, order: FractionalOrder, scheme: str) -> np.ndarray:
    """Rows of f -> -c_a ∫ (|x-y|^(2a) - |y|^(2a)) f(y) dy at targets x >= 0."""
    p = 2.0 * order.alpha
    direct = kernel_weights(targets, grid.nodes, p, odd=False, reflected=False, scheme=scheme)
    mirror = kernel_weights(targets, grid.nodes, p, odd=False, reflected=True, scheme=scheme)
    base = kernel_weights([0.0], grid.nodes, p, odd=False, reflected=False, scheme=scheme)
    return -order.c_alpha * (direct + mirror - 2.0 * base)


def default_scheme(grid: HalfGrid) -> str:
    return "quadratic" if grid.n % 2 == 0 else "linear"


@dataclass(frozen=True, eq=False)
class KernelMoments:
    """Precomputed product-integration operators for one (grid, order, scheme).

    ``H`` maps nodal values of an even f to nodal values of H_a f; ``W``
    maps them to the cumulative potential -∫_0^x H_a f.
    """

    order: FractionalOrder
    grid: HalfGrid
    scheme: str
    H: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)

    def check(self, p) -> None:
        if not self.grid.same_as(p.grid):
            raise GridMismatchError("profile and kernel moments live on different grids")

    def riesz_at(self, f: EvenProfile, x) -> np.ndarray:
        """H_a f at arbitrary points x >= 0."""
        self.check(f)
        return riesz_weights(x, self.grid, self.order, self.scheme) @ f.samples

    def potential_at(self, f: EvenProfile, x) -> np.ndarray:
        self.check(f)
        return potential_weights(x, self.grid, self.order, self.scheme) @ f.samples

    def dump_row_sums(self, path) -> None:
        """Write row sums of both operators to CSV (audit aid)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "riesz_row_sum", "potential_row_sum"])
            for x, a, b in zip(self.grid.nodes, self.H.sum(axis=1), self.W.sum(axis=1)):
                w.writerow([repr(float(x)), repr(float(a)), repr(float(b))])


def build_moments(grid: HalfGrid, order: FractionalOrder, scheme: Optional[str] = None) -> KernelMoments:
    scheme = scheme or default_scheme(grid)
    H = riesz_weights(grid.nodes, grid, order, scheme)
    H[0, :] = 0.0
    W = potential_weights(grid.nodes, grid, order, scheme)
    W[0, :] = 0.0
    H.setflags(write=False)
    W.setflags(write=False)
    return KernelMoments(order=order, grid=grid, scheme=scheme, H=H, W=W)


_CACHE: "OrderedDict[tuple, KernelMoments]" = OrderedDict()
_CACHE_SIZE = 4
_CACHE_LOCK = threading.Lock()


def cached_moments(grid: HalfGrid, order: FractionalOrder, scheme: Optional[str] = None) -> KernelMoments:
    """:func:`build_moments` behind a small LRU cache keyed on the node values."""
    scheme = scheme or default_scheme(grid)
    key = (order.s, scheme, grid.n, hashlib.sha1(grid.nodes.tobytes()).hexdigest())
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
        if hit is not None:
            _CACHE.move_to_end(key)
            if hit.grid.same_as(grid):
                return hit
    m = build_moments(grid, order, scheme)
    with _CACHE_LOCK:
        _CACHE[key] = m
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return m


def hat_moment_table(grid: HalfGrid, order: FractionalOrder, kernel: str) -> np.ndarray:
    """Exact moments of a kernel against the two linear hats of every cell.

    Returns shape (n+1, n, 2): [node i, cell j, (left hat, right hat)] for
    ``kernel`` "abs" (|x_i - y|^(2a)) or "sgn" (sgn(x_i - y)|x_i - y|^(2a-1)).
    """
    from ._moments import local_moments

    lo, hi = grid.nodes[:-1], grid.nodes[1:]
    eta = 0.5 * (hi - lo)
    delta = 0.5 * (lo + hi)[None, :] - grid.nodes[:, None]
    if kernel == "abs":
        mu = local_moments(delta, eta[None, :], 2.0 * order.alpha, odd=False, qmax=1)
    elif kernel == "sgn":
        mu = -local_moments(delta, eta[None, :], 2.0 * order.alpha - 1.0, odd=True, qmax=1)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    left = 0.5 * (mu[..., 0] - mu[..., 1] / eta)
    right = 0.5 * (mu[..., 0] + mu[..., 1] / eta)
    return np.stack([left, right], axis=-1)


def conj_riesz(f: EvenProfile, m: KernelMoments) -> OddProfile:
    """H_a f at the nodes; odd, so only x >= 0 is returned."""
    m.check(f)
    out = m.H @ f.samples
    out[0] = 0.0
    return OddProfile(f.grid, out)


def cumulative_potential(f: EvenProfile, m: KernelMoments) -> EvenProfile:
    """-∫_0^x H_a f for a signed even f."""
    m.check(f)
    out = m.W @ f.samples
    out[0] = 0.0
    return EvenProfile(f.grid, out)


def exponent_integral(rho: EvenProfile, m: KernelMoments) -> EvenProfile:
    """w = -∫_0^x H_a(rho) for a density rho >= 0; w(0) = 0 and w is even."""
    if np.any(rho.samples < 0):
        raise ValueError("exponent_integral needs a nonnegative density")
    return cumulative_potential(rho, m)


def cumulative_of_odd(g: OddProfile, m: KernelMoments, f: Optional[EvenProfile] = None) -> np.ndarray:
    """∫_0^x g by the trapezoid rule in x; with ``f`` given, Simpson per cell.

    Simpson uses H_a f evaluated at cell midpoints (``g`` must be H_a f).
    """
    nodes = g.grid.nodes
    dx = np.diff(nodes)
    y = g.samples
    if f is None:
        incr = 0.5 * dx * (y[:-1] + y[1:])
    else:
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        ym = m.riesz_at(f, mids)
        incr = dx / 6.0 * (y[:-1] + 4.0 * ym + y[1:])
    return np.concatenate([[0.0], np.cumsum(incr)])


def consistency_gap(rho: EvenProfile, m: KernelMoments, rule: str = "simpson") -> float:
    """sup |w + ∫_0^x H_a rho| comparing the potential route with the
    cumulated Riesz route."""
    w = exponent_integral(rho, m).samples
    hr = conj_riesz(rho, m)
    cum = cumulative_of_odd(hr, m, rho if rule == "simpson" else None)
    return float(np.max(np.abs(w + cum)))
