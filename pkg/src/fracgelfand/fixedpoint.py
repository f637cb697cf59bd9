"""Shooting map, fixed-point solver and Newton refinement.

For a shooting value lambda > 0 and a Gaussian homotopy parameter sigma >= 0
the map is

    T[v](x) = lambda sqrt(K(x)) exp(-sigma^2 x^2 / 2) exp(w(x) / 2),
    w = -∫_0^x H_a(v^2),

and its fixed points are v = sqrt(K e^u) for the even, decreasing solution
u = 2 log v - log K with v(0) = lambda sqrt(K(0)).  Everything is evaluated
in log space, so profiles that decay far below the smallest normal double
never underflow before they are needed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from . import __version__
from .grid import EvenProfile, HalfGrid, integrate, make_grid, make_mapped_grid
from .params import FractionalOrder
from .riesz import KernelMoments, cached_moments
from .weight import Weight, constant


class NonConvergenceError(RuntimeError):
    """The iteration did not reach its tolerance; carries the residual history."""

    def __init__(self, message: str, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class GridPolicyExhausted(RuntimeError):
    """The domain could not be enlarged enough to meet the tail tolerance."""


class InvariantViolation(RuntimeError):
    """A converged iterate is not positive and nonincreasing."""


@dataclass(frozen=True)
class ShootingParams:
    lam: float
    sigma: float
    weight: Weight
    order: FractionalOrder

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")

    @property
    def anchor(self) -> float:
        """v(0) = lambda sqrt(K(0))."""
        return self.lam * math.sqrt(self.weight.peak)

    @property
    def core_length(self) -> float:
        """Natural length of the profile; solutions at other lambda are dilations."""
        return self.anchor ** (-1.0 / self.order.s)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "sigma": self.sigma, "s": self.order.s, "weight": self.weight.to_dict()}


@dataclass(frozen=True)
class SolveOptions:
    """Iteration and grid policy.

    ``L`` is a half-length or ``"auto"``; with ``"auto"`` the domain starts
    at 40 core lengths and grows until v(L)/v(0) <= ``tail_tol``.
    ``stretch`` is the sinh scale of the mapped grid: ``"auto"`` picks 4
    core lengths when L is automatic and a uniform grid otherwise, ``None``
    forces a uniform grid.
    """

    tol: float = 1e-10
    max_iter: int = 300
    damping: float = 1.0
    anderson_depth: int = 5
    tail_tol: float = 1e-30
    L: Union[str, float] = "auto"
    n: int = 2048
    stretch: Union[str, float, None] = "auto"
    max_enlarge: int = 10
    newton: bool = True
    newton_switch: float = 1e-3
    newton_max: int = 20
    scheme: Optional[str] = None
    n_max: int = 8192

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.anderson_depth < 0 or self.max_iter < 1:
            raise ValueError("anderson_depth must be >= 0 and max_iter >= 1")
        if not 0 < self.tail_tol < 1:
            raise ValueError("tail_tol must lie in (0, 1)")
        if self.L != "auto" and not (isinstance(self.L, (int, float)) and self.L > 0):
            raise ValueError(f"L must be 'auto' or a positive number, got {self.L!r}")
        if int(self.n) != self.n or self.n < 16:
            raise ValueError("n must be an integer >= 16")
        if self.stretch not in ("auto", None) and not (isinstance(self.stretch, (int, float)) and self.stretch > 0):
            raise ValueError(f"stretch must be 'auto', None or positive, got {self.stretch!r}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class Solution:
    params: ShootingParams
    options: SolveOptions
    v: EvenProfile
    log_v: np.ndarray = field(repr=False)
    u: EvenProfile = field(repr=False)
    w: EvenProfile = field(repr=False)
    mass: float = 0.0
    residual: float = 0.0
    residual_history: Tuple[float, ...] = ()
    iterations: int = 0
    decay_fit: Optional[Tuple[float, float]] = None
    tail_ratio: float = 0.0
    enlargements: int = 0
    moments: Optional[KernelMoments] = field(default=None, repr=False)

    @property
    def grid(self) -> HalfGrid:
        return self.v.grid

    @property
    def order(self) -> FractionalOrder:
        return self.params.order

    def get_moments(self) -> KernelMoments:
        if self.moments is not None:
            return self.moments
        return cached_moments(self.grid, self.order, self.options.scheme)

    def diagnostics(self) -> dict:
        return {
            "version": __version__,
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "mass": self.mass,
            "v0": float(self.v.samples[0]),
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "decay_fit": None if self.decay_fit is None else {"d": self.decay_fit[0], "p": self.decay_fit[1]},
            "tail_ratio": self.tail_ratio,
            "tail_ok": self.tail_ratio <= self.options.tail_tol,
            "enlargements": self.enlargements,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "v", "u", "w"])
        for row in zip(self.grid.nodes, self.v.samples, self.u.samples, self.w.samples):
            wr.writerow([repr(float(t)) for t in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.diagnostics(), indent=2, sort_keys=True)


# -- the map and its derivative -------------------------------------------


def log_apply_T(v: EvenProfile, p: ShootingParams, m: KernelMoments) -> np.ndarray:
    """log T[v] at the nodes."""
    m.check(v)
    x = v.grid.nodes
    w = m.W @ (v.samples * v.samples)
    return math.log(p.lam) + 0.5 * p.weight.log_value(x) - 0.5 * p.sigma**2 * x * x + 0.5 * w


def apply_T(v: EvenProfile, p: ShootingParams, m: KernelMoments) -> EvenProfile:
    """The shooting map; positive everywhere and equal to lambda sqrt(K(0)) at 0."""
    if not np.all(np.isfinite(v.samples)):
        raise ValueError("iterate has non-finite samples")
    return EvenProfile(v.grid, np.exp(log_apply_T(v, p, m)))


def frechet_apply(v: EvenProfile, h: EvenProfile, p: ShootingParams, m: KernelMoments) -> EvenProfile:
    """D_v T[v] h = -T[v](x) ∫_0^x H_a(v h)."""
    m.check(h)
    t = np.exp(log_apply_T(v, p, m))
    return EvenProfile(v.grid, t * (m.W @ (v.samples * h.samples)))


def frechet_matrix(v: EvenProfile, p: ShootingParams, m: KernelMoments) -> np.ndarray:
    """Dense matrix of :func:`frechet_apply` on nodal coordinates."""
    t = np.exp(log_apply_T(v, p, m))
    return t[:, None] * m.W * v.samples[None, :]


# -- iteration -------------------------------------------------------------


def _residual(v: np.ndarray, t: np.ndarray) -> float:
    return float(np.max(np.abs(t - v)) / np.max(np.abs(v)))


def _picard(p, o: SolveOptions, m, v: np.ndarray, target: float):
    """Damped Picard with Anderson mixing until the relative residual <= target."""
    grid = m.grid
    theta = o.damping
    hist: List[float] = []
    dv: List[np.ndarray] = []
    df: List[np.ndarray] = []
    prev_v = prev_f = None
    for it in range(1, o.max_iter + 1):
        t = np.exp(log_apply_T(EvenProfile(grid, v), p, m))
        f = t - v
        res = float(np.max(np.abs(f)) / np.max(np.abs(v)))
        hist.append(res)
        if res <= target:
            return v, hist, it
        if len(hist) > 1 and res > hist[-2]:
            theta = 0.5 * theta
            dv.clear()
            df.clear()
            prev_v = prev_f = None
            if theta < 2.0**-12:
                break
        if prev_v is not None and o.anderson_depth > 0:
            dv.append(v - prev_v)
            df.append(f - prev_f)
            if len(dv) > o.anderson_depth:
                dv.pop(0)
                df.pop(0)
        prev_v, prev_f = v, f
        step = v + theta * f
        if dv:
            DF = np.stack(df, axis=1)
            DV = np.stack(dv, axis=1)
            gamma = np.linalg.lstsq(DF, f, rcond=None)[0]
            mixed = step - (DV + theta * DF) @ gamma
            if np.all(np.isfinite(mixed)) and np.all(mixed >= 0):
                step = mixed
        v = step
    raise NonConvergenceError(
        f"Picard iteration stalled at residual {hist[-1]:.3e} (target {target:.1e}); "
        "lower the damping or enlarge the grid",
        hist,
    )


def _newton(p, o: SolveOptions, m, v: np.ndarray, hist: List[float]):
    grid = m.grid
    eye = np.eye(grid.n + 1)
    best = math.inf
    stall = 0
    for it in range(1, o.newton_max + 1):
        t = np.exp(log_apply_T(EvenProfile(grid, v), p, m))
        res = _residual(v, t)
        hist.append(res)
        if res <= o.tol:
            return v, it
        if res < 0.5 * best:
            stall = 0
        else:
            stall += 1
            if stall >= 3:
                break
        best = min(best, res)
        jac = t[:, None] * m.W * v[None, :]
        try:
            delta = scipy.linalg.solve(eye - jac, t - v, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise NonConvergenceError(f"singular Newton system: {exc}", hist) from exc
        v = v + delta
    raise NonConvergenceError(f"Newton stalled at residual {hist[-1]:.3e} (target {o.tol:.1e})", hist)


def _check_invariants(v: np.ndarray, p: ShootingParams) -> None:
    if not np.all(v > 0):
        raise InvariantViolation("fixed point is not strictly positive")
    slack = 1e-12 * v[0]
    if np.any(np.diff(v) > slack):
        i = int(np.argmax(np.diff(v)))
        raise InvariantViolation(f"fixed point increases after node {i}")


def _fit_decay(nodes: np.ndarray, log_ratio: np.ndarray, L: float):
    """Fit -log(v/v(0)) ~ d x^p on [L/4, 3L/4]; None without two decades of decay."""
    win = (nodes >= 0.25 * L) & (nodes <= 0.75 * L) & (log_ratio < 0)
    if win.sum() < 3:
        return None
    y = -log_ratio[win]
    if y[-1] - y[0] < 2.0 * math.log(10.0):
        return None
    slope, icpt = np.polyfit(np.log(nodes[win]), np.log(y), 1)
    return float(math.exp(icpt)), float(slope)


def newton_refine(p: ShootingParams, v: EvenProfile, o: SolveOptions, m: KernelMoments, _hist=None, _iters=0) -> Solution:
    """Newton on (I - D_vT) delta = T[v] - v, then one final application of T."""
    m.check(v)
    hist = list(_hist or [])
    vv, its = _newton(p, o, m, np.array(v.samples), hist)
    return _finish(p, o, m, vv, hist, _iters + its)


def _finish(p, o, m, v, hist, iters, enlargements=0) -> Solution:
    grid = m.grid
    log_v = log_apply_T(EvenProfile(grid, v), p, m)
    v = np.exp(log_v)
    t = np.exp(log_apply_T(EvenProfile(grid, v), p, m))
    res = _residual(v, t)
    hist = hist + [res]
    if res > max(o.tol, 1e-14) * 10:
        raise NonConvergenceError(f"final residual {res:.3e} above tolerance {o.tol:.1e}", hist)
    _check_invariants(v, p)
    rho = v * v
    w = m.W @ rho
    u = 2.0 * log_v - p.weight.log_value(grid.nodes)
    vp = EvenProfile(grid, v)
    return Solution(
        params=p,
        options=o,
        v=vp,
        log_v=log_v,
        u=EvenProfile(grid, u),
        w=EvenProfile(grid, w),
        mass=integrate(EvenProfile(grid, rho)),
        residual=res,
        residual_history=tuple(hist),
        iterations=iters,
        decay_fit=_fit_decay(grid.nodes, log_v - log_v[0], grid.L),
        tail_ratio=float(math.exp(log_v[-1] - log_v[0])),
        enlargements=enlargements,
        moments=m,
    )


# -- grid policy -----------------------------------------------------------


_GAUSS_EXP_MAX = 600.0


def _round_up(x: float, digits: int = 3) -> float:
    e = math.floor(math.log10(x)) - digits + 1
    return math.ceil(x / 10.0**e) * 10.0**e


def _make(L: float, n: int, stretch) -> HalfGrid:
    return make_grid(L, n) if stretch is None else make_mapped_grid(L, n, stretch)


def initial_grid(p: ShootingParams, o: SolveOptions) -> HalfGrid:
    ell = p.core_length
    if o.L == "auto":
        L = 40.0 * ell
        if p.sigma > 0:
            # keep exp(-sigma^2 L^2 / 2) well inside double range
            L = min(L, _round_up(math.sqrt(2.0 * _GAUSS_EXP_MAX) / p.sigma))
        stretch = 4.0 * ell if o.stretch == "auto" else o.stretch
    else:
        L = float(o.L)
        stretch = None if o.stretch == "auto" else o.stretch
    return _make(L, int(o.n), stretch)


def _predicted_length(p: ShootingParams, o: SolveOptions, grid: HalfGrid, rho: np.ndarray) -> float:
    """Half-length at which the a-priori bound on w meets the tail tolerance.

    Uses w(x) <= -c_a M |x|^(2a) + 2 c_a ∫|y|^(2a) rho with M = ∫ rho, and the
    Gaussian factor when sigma > 0; whichever is shorter.
    """
    order = p.order
    c, a2 = order.c_alpha, 2.0 * order.alpha
    x = grid.nodes
    mass = integrate(EvenProfile(grid, rho))
    mom = integrate(EvenProfile(grid, x**a2 * rho))
    target = -2.0 * math.log(o.tail_tol)
    bound = ((target + 2.0 * c * mom) / (c * mass)) ** (1.0 / a2)
    if p.sigma > 0:
        bound = min(bound, math.sqrt(target) / p.sigma)
    return bound


def _enlarged(grid: HalfGrid, L_new: float) -> HalfGrid:
    if grid.stretch is None:
        n = int(math.ceil(grid.n * L_new / grid.L / 2.0)) * 2
        return make_grid(L_new, n)
    return make_mapped_grid(L_new, grid.n, grid.stretch)


def transfer(v: EvenProfile, grid: HalfGrid) -> np.ndarray:
    """Carry an iterate to another grid (log-linear inside, zero outside)."""
    if v.grid.same_as(grid):
        return np.array(v.samples)
    pos = v.samples > 0
    if not pos.all():
        from .grid import interp

        return np.maximum(interp(v, grid.nodes), 0.0)
    lv = np.log(v.samples)
    out = np.exp(np.interp(grid.nodes, v.grid.nodes, lv))
    out[grid.nodes > v.grid.L] = 0.0
    return out


def default_iterate(p: ShootingParams, grid: HalfGrid) -> np.ndarray:
    """lambda sqrt(K) exp(-(x/l)^2/2) with l the core length."""
    x = grid.nodes / p.core_length
    return p.lam * p.weight.sqrt_value(grid.nodes) * np.exp(-0.5 * x * x)


def picard_solve(
    p: ShootingParams,
    o: Optional[SolveOptions] = None,
    v0: Optional[EvenProfile] = None,
    grid: Optional[HalfGrid] = None,
) -> Solution:
    """Solve v = T[v] under the grid policy of ``o``.

    Damped Picard with Anderson mixing brings the residual to
    ``o.newton_switch``; Newton then takes it to ``o.tol``.  With an
    automatic L the domain is enlarged (at least 1.5x, else to the length
    the a-priori bound predicts) until v(L)/v(0) <= ``o.tail_tol``.
    ``grid`` replaces the policy's starting grid (used by continuation).

    Raises
    ------
    NonConvergenceError
        If the iteration does not reach its tolerance.
    GridPolicyExhausted
        If ``o.max_enlarge`` enlargements do not meet the tail tolerance.
    """
    o = o or SolveOptions()
    grid = grid or initial_grid(p, o)
    if v0 is not None:
        if integrate(EvenProfile(v0.grid, v0.samples**2)) <= 0 and p.sigma == 0:
            raise ValueError("initial iterate must be nonzero when sigma = 0")
        v = transfer(v0, grid)
    else:
        v = default_iterate(p, grid)
    total = 0
    enlargements = 0
    while True:
        m = cached_moments(grid, p.order, o.scheme)
        target = max(o.newton_switch, o.tol) if o.newton else o.tol
        v, hist, its = _picard(p, o, m, v, target)
        if o.newton:
            v, nits = _newton(p, o, m, v, hist)
            its += nits
        total += its
        sol = _finish(p, o, m, v, hist, total, enlargements)
        if o.L != "auto" or sol.tail_ratio <= o.tail_tol:
            return sol
        if enlargements >= o.max_enlarge:
            raise GridPolicyExhausted(
                f"tail ratio {sol.tail_ratio:.3e} above {o.tail_tol:.1e} after {enlargements} enlargements (L = {grid.L:g})"
            )
        L_new = _round_up(max(1.5 * grid.L, _predicted_length(p, o, grid, sol.v.samples**2)))
        if p.sigma > 0:
            L_new = min(L_new, _round_up(math.sqrt(2.0 * _GAUSS_EXP_MAX) / p.sigma))
        new_grid = _enlarged(grid, L_new)
        if new_grid.n > o.n_max:
            raise GridPolicyExhausted(f"enlarging to L = {L_new:g} needs n = {new_grid.n} > {o.n_max}")
        v = transfer(sol.v, new_grid)
        grid = new_grid
        enlargements += 1


solve = picard_solve


def solution_from_profile(p: ShootingParams, v: EvenProfile, o: Optional[SolveOptions] = None) -> Solution:
    """Wrap stored samples as a Solution without iterating.

    The residual is measured, not enforced, so a damaged profile can still be
    handed to the verifiers.  ``v`` must be strictly positive.
    """
    o = o or SolveOptions()
    if not np.all(v.samples > 0):
        raise InvariantViolation("stored profile is not strictly positive")
    grid = v.grid
    m = cached_moments(grid, p.order, o.scheme)
    log_v = np.log(v.samples)
    t = np.exp(log_apply_T(v, p, m))
    rho = v.samples**2
    return Solution(
        params=p,
        options=o,
        v=v,
        log_v=log_v,
        u=EvenProfile(grid, 2.0 * log_v - p.weight.log_value(grid.nodes)),
        w=EvenProfile(grid, m.W @ rho),
        mass=integrate(EvenProfile(grid, rho)),
        residual=_residual(v.samples, t),
        decay_fit=_fit_decay(grid.nodes, log_v - log_v[0], grid.L),
        tail_ratio=float(v.samples[-1] / v.samples[0]),
        moments=m,
    )


def recover_u(v: EvenProfile, k: Weight) -> EvenProfile:
    """u = log(v^2 / K)."""
    if np.any(v.samples <= 0):
        raise ValueError("v must be positive to recover u")
    return EvenProfile(v.grid, 2.0 * np.log(v.samples) - k.log_value(v.grid.nodes))


def rescale_solution(sol: Solution, mu: float) -> Solution:
    """The dilated solution u(mu x) + 2s log mu, i.e. v_mu(x) = mu^s v(mu x).

    Lives on the grid with nodes x / mu, at shooting value mu^s lambda.
    Only constant weights have this symmetry.
    """
    if not sol.params.weight.is_constant:
        raise ValueError("rescaling needs a constant weight")
    if not (math.isfinite(mu) and mu > 0):
        raise ValueError("mu must be positive")
    if mu == 1.0:
        return sol
    s = sol.order.s
    grid = sol.grid.scaled(1.0 / mu)
    shift = s * math.log(mu)
    log_v = sol.log_v + shift
    v = np.exp(log_v)
    params = replace(sol.params, lam=sol.params.lam * mu**s, sigma=sol.params.sigma * mu)
    return Solution(
        params=params,
        options=sol.options,
        v=EvenProfile(grid, v),
        log_v=log_v,
        u=EvenProfile(grid, sol.u.samples + 2.0 * shift),
        w=EvenProfile(grid, sol.w.samples),
        mass=integrate(EvenProfile(grid, v * v)),
        residual=sol.residual,
        residual_history=sol.residual_history,
        iterations=sol.iterations,
        decay_fit=_fit_decay(grid.nodes, log_v - log_v[0], grid.L),
        tail_ratio=sol.tail_ratio,
        enlargements=sol.enlargements,
        moments=None,
    )


def default_params(s: float, lam: float = 1.0, sigma: float = 0.0, weight: Optional[Weight] = None) -> ShootingParams:
    from .params import make_order

    return ShootingParams(lam, sigma, weight or constant(1.0), make_order(s))
