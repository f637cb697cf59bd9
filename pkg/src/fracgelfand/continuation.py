"""Branches of fixed points in sigma and lambda, and a multi-start probe.

Each corrector is a full solve warm-started from the previous point
(zeroth-order predictor).  A failed corrector halves the parameter step;
three easy successes in a row double it again.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .fixedpoint import (
    NonConvergenceError,
    ShootingParams,
    Solution,
    SolveOptions,
    _residual,
    initial_grid,
    log_apply_T,
    picard_solve,
)
from .grid import EvenProfile, XAlphaNorm, interp, xalpha_norm

SIGMA_MIN = 1e-4
MAX_HALVINGS = 8


class ProbeInconclusive(RuntimeError):
    """A probe restart did not converge, so uniqueness was not tested."""


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    sigma: float
    v: EvenProfile = field(repr=False)
    xalpha: XAlphaNorm
    mass: float
    solution: Solution = field(repr=False)


@dataclass
class BranchPath:
    points: List[BranchPoint] = field(default_factory=list)
    rejected_steps: int = 0
    modulus: float = 0.0

    def __len__(self):
        return len(self.points)

    @property
    def final(self) -> BranchPoint:
        return self.points[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "sigma", "mass", "v0", "xalpha_total"])
        for p in self.points:
            w.writerow([repr(float(p.lam)), repr(float(p.sigma)), repr(p.mass), repr(float(p.v.samples[0])), repr(p.xalpha.total)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "points": len(self.points),
            "rejected_steps": self.rejected_steps,
            "continuity_modulus": self.modulus,
            "masses": [p.mass for p in self.points],
        }


def verify_point(sol: Solution) -> None:
    """Re-check residual, positivity, monotonicity and the anchor from scratch."""
    m = sol.get_moments()
    v = sol.v.samples
    t = np.exp(log_apply_T(sol.v, sol.params, m))
    res = _residual(v, t)
    tol = max(sol.options.tol, 1e-14) * 10
    if res > tol:
        raise NonConvergenceError(f"branch point residual {res:.3e} above {tol:.1e}")
    if not np.all(v > 0) or np.any(np.diff(v) > 1e-12 * v[0]):
        raise NonConvergenceError("branch point is not positive and nonincreasing")
    if abs(v[0] - sol.params.anchor) > 1e-12 * sol.params.anchor:
        raise NonConvergenceError("branch point misses the anchor v(0) = lambda sqrt(K(0))")


def _point(sol: Solution) -> BranchPoint:
    verify_point(sol)
    return BranchPoint(sol.params.lam, sol.params.sigma, sol.v, xalpha_norm(sol.v, sol.order), sol.mass, sol)


def _modulus(points: List[BranchPoint], key) -> float:
    worst = 0.0
    for a, b in zip(points, points[1:]):
        step = abs(key(b) - key(a))
        if step == 0:
            continue
        diff = np.max(np.abs(b.v.samples - interp(a.v, b.v.grid.nodes)))
        worst = max(worst, float(diff) / step)
    return worst


def sigma_schedule(sigma_from: float, to_zero: bool = True, sigma_min: float = SIGMA_MIN) -> List[float]:
    """sigma_0 / 2^j down to sigma_min, then 0."""
    if sigma_from <= sigma_min:
        return [0.0] if to_zero else [sigma_from]
    sched = []
    s = sigma_from
    while s >= sigma_min:
        sched.append(s)
        s *= 0.5
    if to_zero:
        sched.append(0.0)
    return sched


def continue_sigma(
    p: ShootingParams, o: Optional[SolveOptions] = None, to_zero: bool = True, sigma_min: float = SIGMA_MIN
) -> BranchPath:
    """Follow the homotopy from sigma = p.sigma toward 0.

    Intermediate steps start on the previous step's grid.  The sigma = 0
    endpoint restarts the grid policy from its own initial grid, so it lands
    on the grid a direct sigma = 0 solve would use.
    """
    if not p.sigma > 0:
        raise ValueError("sigma_from must be positive")
    o = o or SolveOptions()
    targets = sigma_schedule(p.sigma, to_zero, sigma_min)
    path = BranchPath()
    prev: Optional[Solution] = None
    i = 0
    current = targets[0]
    halvings = 0
    while i < len(targets):
        q = replace(p, sigma=current)
        try:
            if prev is None:
                sol = picard_solve(q, o)
            elif current == 0.0 and o.L == "auto":
                sol = picard_solve(q, o, v0=prev.v, grid=initial_grid(q, o))
            else:
                sol = picard_solve(q, o, v0=prev.v, grid=prev.grid)
        except NonConvergenceError:
            if prev is None or halvings >= MAX_HALVINGS:
                raise
            path.rejected_steps += 1
            halvings += 1
            last = prev.params.sigma
            current = math.sqrt(last * current) if current > 0 else 0.5 * last
            continue
        path.points.append(_point(sol))
        prev = sol
        if current == targets[i]:
            i += 1
            halvings = 0
        if i < len(targets):
            current = targets[i]
    path.modulus = _modulus(path.points, lambda b: b.sigma)
    return path


def continue_lambda(
    p: ShootingParams, lambda_to: float, o: Optional[SolveOptions] = None, max_ratio: float = 2.0
) -> BranchPath:
    """Geometric lambda schedule from p.lam to ``lambda_to`` with adaptive steps."""
    if not lambda_to > 0:
        raise ValueError("lambda_to must be positive")
    o = o or SolveOptions()
    lam0 = p.lam
    path = BranchPath()
    sol = picard_solve(p, o)
    path.points.append(_point(sol))
    if lambda_to == lam0:
        return path
    direction = 1.0 if lambda_to > lam0 else -1.0
    max_step = math.log(max_ratio)
    step = max_step
    easy = 0
    log_lam = math.log(lam0)
    log_to = math.log(lambda_to)
    halvings = 0
    while direction * (log_to - log_lam) > 1e-14:
        nxt = log_lam + direction * min(step, abs(log_to - log_lam))
        lam = lambda_to if abs(nxt - log_to) < 1e-14 else math.exp(nxt)
        q = replace(p, lam=lam)
        try:
            new = picard_solve(q, o, v0=sol.v)
        except NonConvergenceError:
            halvings += 1
            path.rejected_steps += 1
            if halvings > MAX_HALVINGS:
                raise
            step *= 0.5
            easy = 0
            continue
        halvings = 0
        path.points.append(_point(new))
        sol = new
        log_lam = math.log(lam) if lam != lambda_to else log_to
        easy = easy + 1 if new.iterations <= 8 else 0
        if easy >= 3:
            step = min(2.0 * step, max_step)
            easy = 0
    path.modulus = _modulus(path.points, lambda b: b.lam)
    return path


def random_iterate(p: ShootingParams, rng: np.random.Generator, grid) -> EvenProfile:
    """A strictly positive even bump with L2 norm >= 0.1 lambda."""
    amp = p.anchor * rng.uniform(0.3, 3.0)
    width = p.core_length * rng.uniform(0.3, 3.0)
    x = grid.nodes / width
    shape = np.exp(-0.5 * x * x) if rng.random() < 0.5 else 1.0 / np.cosh(x) ** 2
    v = amp * np.maximum(shape, 1e-300)
    l2 = math.sqrt(2.0 * float(grid.weights @ (v * v)))
    if l2 < 0.1 * p.lam:
        v *= 0.1 * p.lam / l2
    return EvenProfile(grid, v)


def uniqueness_probe(
    p: ShootingParams, k: int = 5, seed: int = 0, o: Optional[SolveOptions] = None, workers: int = 1
) -> float:
    """Max pairwise sup distance between solves from ``k`` random iterates."""
    if k < 2:
        raise ValueError("the probe needs k >= 2")
    o = o or SolveOptions()
    grid0 = initial_grid(p, o)
    rng = np.random.default_rng(seed)
    starts = [random_iterate(p, rng, grid0) for _ in range(k)]

    def run(v0):
        try:
            return picard_solve(p, o, v0=v0)
        except NonConvergenceError as exc:
            raise ProbeInconclusive(f"a restart did not converge: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            sols = list(ex.map(run, starts))
    else:
        sols = [run(v0) for v0 in starts]
    ref = sols[0].grid
    vs = [s.v.samples if s.grid.same_as(ref) else interp(s.v, ref.nodes) for s in sols]
    worst = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            worst = max(worst, float(np.max(np.abs(vs[i] - vs[j]))))
    return worst
