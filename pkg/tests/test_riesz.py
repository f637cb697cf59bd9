import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracgelfand.grid import EvenProfile, make_grid, make_mapped_grid
from fracgelfand.params import make_order
from fracgelfand.riesz import (
    GridMismatchError,
    build_moments,
    cached_moments,
    conj_riesz,
    consistency_gap,
    exponent_integral,
    hat_moment_table,
)

Q = make_order(0.75)
BOX_H1 = 2.0 / math.sqrt(math.pi)
BOX_H3 = Q.c_alpha * (2.0 - math.sqrt(2.0))
BOX_W1 = -Q.c_alpha * (4.0 * math.sqrt(2.0) / 3.0 - 4.0 / 3.0)


def _box(n):
    g = make_grid(1.0, n)
    return EvenProfile(g, np.ones(n + 1), density=True)


@pytest.mark.parametrize("scheme", ["linear", "quadratic"])
def test_box_closed_forms(scheme):
    box = _box(256)
    m = build_moments(box.grid, Q, scheme)
    h = conj_riesz(box, m)
    w = exponent_integral(box, m)
    assert h.samples[0] == 0.0 and w.samples[0] == 0.0
    assert h.samples[-1] == pytest.approx(BOX_H1, abs=1e-12)
    assert m.riesz_at(box, [3.0])[0] == pytest.approx(BOX_H3, abs=1e-12)
    assert w.samples[-1] == pytest.approx(BOX_W1, abs=1e-12)
    x = box.grid.nodes
    exact = Q.c_alpha * (np.sqrt(x + 1) - np.sqrt(np.abs(1 - x)))
    assert np.max(np.abs(h.samples - exact)) < 1e-12


def test_half_order_is_running_integral():
    o = make_order(1.0)
    g = make_grid(30.0, 1024)
    rho = EvenProfile(g, 1.0 / np.cosh(g.nodes / math.sqrt(2)) ** 2, density=True)
    m = build_moments(g, o)
    h = conj_riesz(rho, m).samples
    assert np.max(np.abs(h - math.sqrt(2) * np.tanh(g.nodes / math.sqrt(2)))) < 1e-6
    w = exponent_integral(rho, m).samples
    # full w; the map carries the factor 1/2
    assert np.max(np.abs(w + 2.0 * np.log(np.cosh(g.nodes / math.sqrt(2))))) < 1e-5
    box = _box(64)
    hb = conj_riesz(box, build_moments(box.grid, o, "linear"))
    assert np.max(np.abs(hb.samples - box.grid.nodes)) < 1e-12
    assert hb.parity == "odd"
    assert build_moments(box.grid, o).riesz_at(box, [1.5])[0] == pytest.approx(1.0, abs=1e-12)


def test_sign_and_parity_on_mapped_grid():
    for s in (0.6, 0.75, 0.9):
        o = make_order(s)
        g = make_mapped_grid(200.0, 512, 3.0)
        rho = EvenProfile(g, np.exp(-np.sqrt(1 + g.nodes**2)), density=True)
        m = cached_moments(g, o)
        h = conj_riesz(rho, m).samples
        assert np.all(h[1:] > 0)
        w = exponent_integral(rho, m).samples
        assert np.all(np.diff(w) < 0)


def test_moment_tables():
    g = make_grid(3.0, 24)
    a = hat_moment_table(g, Q, "abs")
    assert np.all(a >= 0)
    # reflection x_i -> L - x_i, cell j -> n-1-j swaps left and right hats
    assert np.allclose(a, a[::-1, ::-1, ::-1], rtol=1e-12, atol=1e-14)
    s = hat_moment_table(g, Q, "sgn")
    assert np.allclose(s, -s[::-1, ::-1, ::-1], rtol=1e-11, atol=1e-13)
    with pytest.raises(ValueError):
        hat_moment_table(g, Q, "other")


def test_consistency_gap():
    box = _box(1024)
    assert consistency_gap(box, build_moments(box.grid, Q)) < 1e-6
    zero = box.with_samples(np.zeros(1025), density=True)
    assert consistency_gap(zero, build_moments(box.grid, Q)) == 0.0
    gaps = []
    for n in (128, 256):
        g = make_grid(10.0, n)
        rho = EvenProfile(g, np.exp(-g.nodes**2), density=True)
        gaps.append(consistency_gap(rho, build_moments(g, Q), rule="trapezoid"))
    assert gaps[0] / gaps[1] >= 4.0 * 0.9


def test_second_order_against_closed_form():
    # H_a of a hat-free smooth input: compare self-convergence
    vals = []
    for n in (128, 256, 512):
        g = make_grid(8.0, n)
        r = EvenProfile(g, np.exp(-g.nodes**2), density=True)
        vals.append(conj_riesz(r, build_moments(g, Q, "linear")).samples[n // 8])
    e = np.abs(np.diff(vals))
    assert math.log2(e[0] / e[1]) >= 1.9


def test_guards():
    box = _box(32)
    other = make_grid(2.0, 32)
    with pytest.raises(GridMismatchError):
        conj_riesz(box, build_moments(other, Q))
    with pytest.raises(ValueError):
        exponent_integral(EvenProfile(box.grid, -np.ones(33)), build_moments(box.grid, Q))


def test_a_priori_upper_bound():
    # w(x) <= -c_a M |x|^(2a) + 2 c_a ∫|y|^(2a) rho
    g = make_grid(20.0, 512)
    rho = EvenProfile(g, np.exp(-g.nodes**2 / 2), density=True)
    m = build_moments(g, Q)
    w = exponent_integral(rho, m).samples
    mass = 2 * g.weights @ rho.samples
    mom = 2 * g.weights @ (g.nodes**0.5 * rho.samples)
    bound = -Q.c_alpha * mass * g.nodes**0.5 + 2 * Q.c_alpha * mom
    assert np.all(w <= bound + 1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=33, max_size=33), st.floats(-4, 4, allow_nan=False))
def test_linearity(a, c):
    g = make_grid(4.0, 32)
    m = cached_moments(g, Q)
    f = EvenProfile(g, np.array(a))
    one = EvenProfile(g, np.exp(-g.nodes))
    lhs = conj_riesz(f.with_samples(f.samples + c * one.samples), m).samples
    rhs = conj_riesz(f, m).samples + c * conj_riesz(one, m).samples
    assert np.allclose(lhs, rhs, atol=1e-10)
