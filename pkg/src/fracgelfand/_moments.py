"""Cell moments of power kernels, stable for near and far cells.

Every kernel in this package is a power |t|^p or sgn(t)|t|^p of a shift
t = y - x (or t = y + x).  Against a cell with center m and half-width eta,
in the local variable tau = y - m, the moments

    mu_q = ∫_{-eta}^{eta} k(delta + tau) tau^q dtau,   delta = m - x,

are all the product-integration rules need.  Near cells use exact
antiderivatives; far cells (|delta| >= KAPPA*eta) use the binomial series of
(1 + tau/delta)^p, which avoids the cancellation of differencing large
antiderivatives.
"""

from __future__ import annotations

import numpy as np
from scipy.special import binom

KAPPA = 6.0
_NTERMS = 22  # KAPPA**-22 < 1e-16
_ROW_BLOCK = 32


def _series_coefficients(p: float, q: int) -> np.ndarray:
    ks = np.arange(_NTERMS)
    ks = ks[(ks + q) % 2 == 0]
    return binom(p, ks) * 2.0 / (ks + q + 1.0)


def _primitive(t: np.ndarray, p: float, j: int, odd: bool) -> np.ndarray:
    """Antiderivative of k(t) t^j vanishing at t = 0."""
    at = np.abs(t)
    e = p + j + 1.0
    val = at**e / e
    integrand_even = (int(odd) + j) % 2 == 0
    if integrand_even:
        val = np.sign(t) * val
    return val


def local_moments(delta, eta, p: float, odd: bool, qmax: int = 2) -> np.ndarray:
    """Moments mu_0..mu_qmax; output shape ``broadcast(delta, eta).shape + (qmax+1,)``.

    ``odd`` selects sgn(t)|t|^p instead of |t|^p.  Requires p > -1.
    """
    delta, eta = np.broadcast_arrays(np.asarray(delta, float), np.asarray(eta, float))
    out = np.empty((qmax + 1,) + delta.shape)  # q-first keeps slices contiguous
    far = np.abs(delta) >= KAPPA * eta

    # series everywhere (near entries are overwritten below)
    d = np.where(far, delta, KAPPA * eta + 1.0)
    r = eta / d
    r2 = r * r
    base = np.abs(d) ** p
    if odd:
        base *= np.sign(d)
    scale = base * eta
    for q in range(qmax + 1):
        coef = _series_coefficients(p, q)
        acc = np.full_like(r2, coef[-1])
        for c in coef[-2::-1]:
            acc *= r2
            acc += c
        if q % 2 == 1:
            acc *= r
        np.multiply(scale, acc, out=out[q])
        scale = scale * eta

    near = np.nonzero(~far)
    if near[0].size:
        d = delta[near]
        e = eta[near]
        lo = d - e
        hi = d + e
        # a target on a cell end must give an exact 0 there: |rounding|^(p+1) is not small
        snap = 64.0 * np.finfo(float).eps * (np.abs(d) + e)
        lo[np.abs(lo) < snap] = 0.0
        hi[np.abs(hi) < snap] = 0.0
        prims = [_primitive(hi, p, j, odd) - _primitive(lo, p, j, odd) for j in range(qmax + 1)]
        for q in range(qmax + 1):
            # tau^q = (t - delta)^q expanded binomially
            acc = np.zeros_like(d)
            for j in range(q + 1):
                acc = acc + binom(q, j) * (-d) ** (q - j) * prims[j]
            out[(q,) + near] = acc
    return np.moveaxis(out, 0, -1)


def hat_weights(cell_lo: np.ndarray, cell_hi: np.ndarray, mu: np.ndarray, scheme: str, n_nodes: int) -> np.ndarray:
    """Scatter per-cell moments into nodal weights.

    ``mu`` has shape (targets, cells, 3).  Returns (targets, n_nodes) weights
    such that weights @ f integrates the kernel against the interpolant of f
    (piecewise linear, or piecewise quadratic on consecutive cell pairs).
    """
    ntar = mu.shape[0]
    out = np.zeros((ntar, n_nodes))
    eta = 0.5 * (cell_hi - cell_lo)
    if scheme == "linear":
        left = 0.5 * (mu[..., 0] - mu[..., 1] / eta)
        right = 0.5 * (mu[..., 0] + mu[..., 1] / eta)
        out[:, :-1] += left
        out[:, 1:] += right
        return out
    if scheme != "quadratic":
        raise ValueError(f"unknown scheme {scheme!r}")
    ncell = cell_lo.size
    if ncell % 2:
        raise ValueError("quadratic scheme needs an even number of cells")
    x0 = cell_lo[0::2]
    x1 = cell_hi[0::2]
    x2 = cell_hi[1::2]
    pair_nodes = (x0, x1, x2)
    cols = (slice(0, -1, 2), slice(1, None, 2), slice(2, None, 2))
    for half in (0, 1):
        mid = 0.5 * (cell_lo[half::2] + cell_hi[half::2])
        m0 = np.ascontiguousarray(mu[:, half::2, 0])
        m1 = np.ascontiguousarray(mu[:, half::2, 1])
        m2 = np.ascontiguousarray(mu[:, half::2, 2])
        for b in range(3):
            xa, xb = (pair_nodes[k] for k in range(3) if k != b)
            denom = (pair_nodes[b] - xa) * (pair_nodes[b] - xb)
            da = mid - xa
            db = mid - xb
            # (y - xa)(y - xb) = tau^2 + (da + db) tau + da db
            term = m1 * ((da + db) / denom)
            term += m0 * (da * db / denom)
            term += m2 * (1.0 / denom)
            out[:, cols[b]] += term
    return out


def kernel_weights(targets, nodes: np.ndarray, p: float, odd: bool, reflected: bool, scheme: str) -> np.ndarray:
    """Weights of ∫_0^L k(y ∓ x) f(y) dy at each target x.

    ``reflected`` uses t = y + x (the mirror image of the even extension),
    otherwise t = y - x.
    """
    x = np.atleast_1d(np.asarray(targets, float))[:, None]
    lo = nodes[:-1]
    hi = nodes[1:]
    mid = 0.5 * (lo + hi)
    eta = 0.5 * (hi - lo)
    out = np.empty((x.shape[0], nodes.size))
    for r0 in range(0, x.shape[0], _ROW_BLOCK):  # row blocks stay in cache
        xb = x[r0 : r0 + _ROW_BLOCK]
        delta = mid[None, :] + xb if reflected else mid[None, :] - xb
        mu = local_moments(delta, eta[None, :], p, odd)
        out[r0 : r0 + _ROW_BLOCK] = hat_weights(lo, hi, mu, scheme, nodes.size)
    return out
