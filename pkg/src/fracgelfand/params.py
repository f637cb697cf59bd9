"""Fractional-order constants shared by every kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass


class UnsupportedOrderError(ValueError):
    """Raised for orders outside (1/2, 1]."""


@dataclass(frozen=True)
class FractionalOrder:
    """The order s and the constants derived from it.

    Attributes
    ----------
    s : float
        Order of the fractional Laplacian, 1/2 < s <= 1.
    alpha : float
        ``s - 1/2``; the Riesz exponent of the Green's function |x|^(2 alpha).
    c_alpha : float
        Green's constant: (-Δ)^s (-c_alpha |x|^(2 alpha)) = δ.
    d_alpha : float
        ``2 alpha c_alpha``, prefactor of the conjugate Riesz kernel.
    big_C_s : float
        Normalization of the singular-integral form of (-Δ)^s.
    gamma_s : float
        Riesz-potential normalization (diagnostic only).
    oracle_endpoint : bool
        True at s = 1, where the equation reduces to -u'' = K e^u.
    """

    s: float
    alpha: float
    c_alpha: float
    d_alpha: float
    big_C_s: float
    gamma_s: float
    oracle_endpoint: bool

    @property
    def label(self) -> str:
        return "oracle endpoint" if self.oracle_endpoint else f"s={self.s:g}"


def green_constant(alpha: float) -> float:
    if alpha == 0.5:
        # Γ(-1/2) = -2√π and Γ(1) = 1 reduce the formula to exactly 1/2.
        return 0.5
    return -(math.pi ** -0.5) * 2.0 ** (-2.0 * alpha - 1.0) * math.gamma(-alpha) / math.gamma(alpha + 0.5)


def make_order(s: float) -> FractionalOrder:
    """Build the constants for order ``s``.

    Raises
    ------
    UnsupportedOrderError
        If ``s <= 1/2`` (the α = 0 kernel is not integrable) or ``s > 1``.
    """
    s = float(s)
    if not math.isfinite(s) or s <= 0.5 or s > 1.0:
        raise UnsupportedOrderError(f"order s={s!r} outside (1/2, 1]")
    alpha = s - 0.5
    c = green_constant(alpha)
    if s < 1.0:
        big_c = 4.0**s / math.sqrt(math.pi) * math.gamma(0.5 + s) / abs(math.gamma(-s))
        gamma_s = math.sqrt(math.pi) * 2.0**s * math.gamma(s / 2.0) / math.gamma((1.0 - s) / 2.0)
    else:
        # Γ(-s) and Γ((1-s)/2) have poles at s = 1; the classical Laplacian takes over.
        big_c = 0.0
        gamma_s = math.inf
    return FractionalOrder(
        s=s,
        alpha=alpha,
        c_alpha=c,
        d_alpha=2.0 * alpha * c,
        big_C_s=big_c,
        gamma_s=gamma_s,
        oracle_endpoint=(s == 1.0),
    )
