"""Linearized operator: Morse index, kernel equations and nondegeneracy.

The quadratic form of (-Δ)^s is discretized with P1 hats on a uniform grid
of [-L, L] with zero exterior.  On the whole line the Gram matrix of the
form in that basis is exactly Toeplitz, with entries

    S(k) = h^(1-2s) κ_s Σ_{m=0}^{4} (-1)^m C(4,m) |k+2-m|^(3-2s),
    κ_s = 2^(2s-4) Γ(s-3/2) / (√π Γ(2-s)),

(the fourth difference of |t|^(3-2s) comes from the hat's Fourier symbol),
which reduces to the stiffness [-1, 2, -1]/h at s = 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.special import comb

from . import __version__
from ._moments import kernel_weights
from .fixedpoint import Solution, frechet_matrix
from .grid import EvenProfile, HalfGrid, interp
from .params import FractionalOrder
from .riesz import KernelMoments, cached_moments

MAX_EIG_NODES = 1024


@dataclass(frozen=True, eq=False)
class GagliardoForm:
    """Stiffness and mass matrices on the interior nodes of [-L, L]."""

    L: float
    n_half: int
    order: FractionalOrder
    nodes: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.L / self.n_half

    def potential_mass(self, V: np.ndarray) -> np.ndarray:
        """∫ V φ_i φ_j for V given at all nodes (boundary included), V linear per cell."""
        h = self.h
        a, b = V[:-1], V[1:]
        full = np.zeros((V.size, V.size))
        idx = np.arange(V.size - 1)
        full[idx, idx] += h / 12.0 * (3 * a + b)
        full[idx + 1, idx + 1] += h / 12.0 * (a + 3 * b)
        off = h / 12.0 * (a + b)
        full[idx, idx + 1] += off
        full[idx + 1, idx] += off
        return full[1:-1, 1:-1]


def stiffness_symbol(k: np.ndarray, h: float, order: FractionalOrder) -> np.ndarray:
    """Entries S(k) of the Toeplitz stiffness at offset k."""
    k = np.abs(np.asarray(k, dtype=float))
    if order.oracle_endpoint:
        return np.where(k == 0, 2.0 / h, np.where(k == 1, -1.0 / h, 0.0))
    s = order.s
    kappa = 2.0 ** (2 * s - 4) * math.gamma(s - 1.5) / (math.sqrt(math.pi) * math.gamma(2 - s))
    e = 3.0 - 2.0 * s
    acc = sum((-1) ** m * comb(4, m) * np.abs(k + 2 - m) ** e for m in range(5))
    return h ** (1 - 2 * s) * kappa * acc


def build_gagliardo(L: float, n_half: int, order: FractionalOrder) -> GagliardoForm:
    """Form on the 2*n_half - 1 interior nodes of a uniform grid of [-L, L]."""
    if n_half < 4 or not L > 0:
        raise ValueError("need L > 0 and n_half >= 4")
    h = L / n_half
    nodes = np.arange(-n_half, n_half + 1) * h
    N = 2 * n_half - 1
    col = stiffness_symbol(np.arange(N), h, order)
    S = scipy.linalg.toeplitz(col)
    M = scipy.linalg.toeplitz(np.concatenate([[2 * h / 3, h / 6], np.zeros(N - 2)]))
    for a in (S, M):
        a.setflags(write=False)
    return GagliardoForm(float(L), int(n_half), order, nodes, S, M)


def morse_form_for(sol: Solution, n_half: int = 512, L: Optional[float] = None) -> GagliardoForm:
    """Default form for a solution: 25 core lengths (within the solve domain)."""
    if L is None:
        L = min(sol.grid.L, 25.0 * sol.params.core_length)
    return build_gagliardo(L, n_half, sol.order)


def potential_on(form: GagliardoForm, V: EvenProfile) -> np.ndarray:
    return interp(V, form.nodes)


def morse_index(V: EvenProfile, form: GagliardoForm, k: int = 5) -> Tuple[int, np.ndarray]:
    """Negative count of the pencil (S - M_V, M) and its lowest ``k`` eigenvalues.

    ``V`` is the potential K e^u = v^2 on its own half-grid.
    """
    Vn = potential_on(form, V)
    A = form.S - form.potential_mass(Vn)
    low = scipy.linalg.eigh(A, form.M, eigvals_only=True, subset_by_index=(0, min(k, A.shape[0]) - 1))
    count = int(np.sum(low < 0))
    if count == low.size:
        count = scipy.linalg.eigh(A, form.M, eigvals_only=True, subset_by_value=(-np.inf, 0.0)).size
    return count, low


def morse_bound_proxy(V: EvenProfile, order: FractionalOrder) -> float:
    """|| |x|^(2a) V ||_L1 + 1, the counting bound with a unit constant."""
    x = V.grid.nodes
    return 2.0 * float(V.grid.weights @ (x ** (2 * order.alpha) * V.samples)) + 1.0


# -- kernel equations ------------------------------------------------------


def _require_pure(sol: Solution) -> None:
    if not sol.params.weight.is_constant or sol.params.sigma != 0:
        raise ValueError("kernel elements need a constant weight and sigma = 0")


def even_kernel_element(sol: Solution, m: Optional[KernelMoments] = None) -> np.ndarray:
    """psi = x u'(x) + 2s with u' = -H_a(v^2)."""
    m = m or sol.get_moments()
    rho = sol.v.samples**2
    du = -(m.H @ rho)
    return sol.grid.nodes * du + 2.0 * sol.order.s


def even_kernel_residual(psi: np.ndarray, sol: Solution, m: Optional[KernelMoments] = None) -> float:
    """sup |psi - psi(0) + ∫_0^x H_a(v^2 psi)| / sup |psi| over |x| <= L/2."""
    m = m or sol.get_moments()
    rho = sol.v.samples**2
    r = psi - psi[0] - m.W @ (rho * psi)
    win = sol.grid.nodes <= 0.5 * sol.grid.L
    return float(np.max(np.abs(r[win])) / np.max(np.abs(psi[win])))


def kernel_residual_even(sol: Solution, m: Optional[KernelMoments] = None) -> float:
    _require_pure(sol)
    return even_kernel_residual(even_kernel_element(sol, m), sol, m)


def _eig_grid(grid: HalfGrid, max_nodes: int) -> Tuple[HalfGrid, int]:
    stride = 1
    while grid.n // stride > max_nodes and grid.n % (2 * stride) == 0:
        stride *= 2
    return (grid if stride == 1 else grid.subsampled(stride)), stride


def birman_schwinger_matrix(v: np.ndarray, grid: HalfGrid, order: FractionalOrder, scheme: str) -> np.ndarray:
    """c_a v(x) ∫_0^L ((x+y)^(2a) - |x-y|^(2a)) v(y) f(y) dy on nodes 1..n."""
    nodes = grid.nodes
    p = 2.0 * order.alpha
    K = kernel_weights(nodes, nodes, p, False, True, scheme) - kernel_weights(nodes, nodes, p, False, False, scheme)
    A = order.c_alpha * v[:, None] * K * v[None, :]
    return A[1:, 1:]


@dataclass(frozen=True)
class BSResult:
    top: float
    gap: float
    eigvec_min: float
    identity_residual: float
    eigvec: np.ndarray = field(repr=False, default=None)


def birman_schwinger_odd(sol: Solution, max_nodes: int = MAX_EIG_NODES) -> BSResult:
    """Top of the odd-sector operator A, its relative gap, positivity and A h = h.

    h = v H_a(v^2) is the known eigenfunction.  Large grids are subsampled
    to at most ``max_nodes`` cells.  The eigenvector is polished by one
    application of A, which maps positive functions to positive ones.
    """
    _require_pure(sol)
    m = sol.get_moments()
    rho = sol.v.samples**2
    hfull = sol.v.samples * (m.H @ rho)
    grid, stride = _eig_grid(sol.grid, max_nodes)
    v = sol.v.samples[::stride]
    if not np.any(v):
        return BSResult(0.0, 0.0, 0.0, 0.0)
    scheme = "quadratic" if grid.n % 2 == 0 else "linear"
    A = birman_schwinger_matrix(v, grid, sol.order, scheme)
    vals, vecs = scipy.linalg.eig(A)
    order_ = np.argsort(-vals.real)
    top = float(vals[order_[0]].real)
    second = float(abs(vals[order_[1]]))
    g = vecs[:, order_[0]].real
    g = A @ g / top
    g = g * np.sign(g.sum())
    g = g / np.max(np.abs(g))
    # the identity is checked on the full grid
    Afull = A if stride == 1 else birman_schwinger_matrix(sol.v.samples, sol.grid, sol.order, m.scheme)
    hs = hfull[1:]
    res = float(np.max(np.abs(Afull @ hs - hs)) / np.max(np.abs(hs)))
    return BSResult(top, (top - second) / top, float(np.min(g[:-1])), res, g)


def linearized_fixedpoint_spectrum(sol: Solution, max_nodes: int = MAX_EIG_NODES) -> float:
    """min |eig(D_vT) - 1| on the even sector (subsampled for large grids)."""
    grid, stride = _eig_grid(sol.grid, max_nodes)
    if stride == 1:
        m = sol.get_moments()
        v = sol.v
    else:
        m = cached_moments(grid, sol.order, sol.options.scheme)
        v = EvenProfile(grid, sol.v.samples[::stride])
    J = frechet_matrix(v, sol.params, m)
    eig = scipy.linalg.eigvals(J)
    return float(np.min(np.abs(eig - 1.0)))


# -- report ----------------------------------------------------------------


@dataclass
class SpectralReport:
    morse_index: Optional[int] = None
    lowest_eigenvalues: Optional[List[float]] = None
    morse_bound_proxy: Optional[float] = None
    kernel_residual_even: Optional[float] = None
    kernel_residual_odd: Optional[float] = None
    bs_top: Optional[Dict[str, float]] = None
    linearized_spectrum_flag: Optional[float] = None
    skipped: Dict[str, str] = field(default_factory=dict)
    failed: Dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ok"] = self.ok
        d["version"] = __version__
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = []
        for k in self.__dataclass_fields__:
            if k in ("skipped", "failed"):
                continue
            status = "skip" if k in self.skipped else ("FAIL" if k in self.failed else "ok")
            rows.append(f"{k:26s} {status:5s} {getattr(self, k)}")
        return "\n".join(rows)


def spectral_report(sol: Solution, n_half: int = 512) -> SpectralReport:
    rep = SpectralReport()
    V = EvenProfile(sol.grid, sol.v.samples**2, density=True)
    form = morse_form_for(sol, n_half)
    rep.morse_index, low = morse_index(V, form)
    rep.lowest_eigenvalues = [float(e) for e in low]
    rep.morse_bound_proxy = morse_bound_proxy(V, sol.order)
    if rep.morse_index < 1:
        rep.failed["morse_index"] = "no negative direction"

    rep.linearized_spectrum_flag = linearized_fixedpoint_spectrum(sol)
    if rep.linearized_spectrum_flag <= 1e-2:
        rep.failed["linearized_spectrum_flag"] = f"{rep.linearized_spectrum_flag:.3e}"

    pure = sol.params.weight.is_constant and sol.params.sigma == 0
    if pure:
        rep.kernel_residual_even = kernel_residual_even(sol)
        bs = birman_schwinger_odd(sol)
        rep.kernel_residual_odd = bs.identity_residual
        rep.bs_top = {"eigenvalue": bs.top, "gap": bs.gap, "eigvec_min": bs.eigvec_min}
        if rep.kernel_residual_even > 1e-4:
            rep.failed["kernel_residual_even"] = f"{rep.kernel_residual_even:.3e}"
        if bs.identity_residual > 1e-3:
            rep.failed["kernel_residual_odd"] = f"{bs.identity_residual:.3e}"
        if abs(bs.top - 1) > 1e-3 or bs.gap <= 1e-3 or bs.eigvec_min <= 0:
            rep.failed["bs_top"] = f"top {bs.top:.6f}, gap {bs.gap:.3e}, min {bs.eigvec_min:.3e}"
    else:
        why = "needs constant weight and sigma = 0"
        rep.skipped.update(kernel_residual_even=why, kernel_residual_odd=why, bs_top=why)
    return rep
