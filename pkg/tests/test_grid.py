import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracgelfand.grid import (
    EvenProfile,
    HalfGrid,
    OddProfile,
    integrate,
    interp,
    make_grid,
    make_mapped_grid,
    profile_from_csv,
    profile_from_json,
    xalpha_norm,
)
from fracgelfand.params import make_order


def test_uniform_grid_sizes():
    g = make_grid(1.0, 16)
    assert g.h == 0.0625 and g.nodes.size == 17
    assert make_grid(30.0, 2048).h == pytest.approx(0.0146484375)
    with pytest.raises(ValueError):
        make_grid(0.0, 16)
    with pytest.raises(ValueError):
        make_grid(1.0, 8)


def test_mapped_grid_ends_exactly():
    g = make_mapped_grid(500.0, 256, 4.0)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 500.0
    assert np.all(np.diff(g.nodes) > 0)
    assert HalfGrid.from_dict(g.to_dict()).same_as(g)


def test_box_area_and_norm():
    g = make_grid(1.0, 64)
    box = EvenProfile(g, np.ones(65))
    assert integrate(box) == pytest.approx(2.0, abs=1e-14)
    nrm = xalpha_norm(box, make_order(0.75))
    assert nrm.l2 == pytest.approx(math.sqrt(2), rel=1e-13)
    assert nrm.weighted_l2 == pytest.approx(math.sqrt(4 / 3), rel=1e-13)
    assert nrm.sup == 1.0
    assert nrm.total == pytest.approx(3.5689141, abs=1e-7)
    zero = xalpha_norm(box.with_samples(np.zeros(65)), make_order(0.75))
    assert (zero.l2, zero.weighted_l2, zero.sup) == (0.0, 0.0, 0.0)


def test_sech_mass():
    g = make_grid(30.0, 2048)
    rho = EvenProfile(g, 1.0 / np.cosh(g.nodes / math.sqrt(2)) ** 2, density=True)
    assert integrate(rho) == pytest.approx(2 * math.sqrt(2), abs=1e-6)


def test_density_and_finiteness_guards():
    g = make_grid(1.0, 16)
    with pytest.raises(ValueError):
        EvenProfile(g, -np.ones(17), density=True)
    with pytest.raises(ValueError):
        EvenProfile(g, np.full(17, np.nan))
    with pytest.raises(ValueError):
        EvenProfile(g, np.ones(5))


def test_interp_parity_and_nodes():
    g = make_grid(2.0, 32)
    y = np.exp(-g.nodes)
    e = EvenProfile(g, y)
    assert np.array_equal(interp(e, g.nodes), y)
    assert interp(e, -0.7) == interp(e, 0.7)
    o = OddProfile(g, np.concatenate([[0.0], np.sin(g.nodes[1:])]))
    assert interp(o, -0.7) == -interp(o, 0.7)
    assert interp(e, 5.0) == 0.0


def test_interp_second_order():
    f = lambda x: 1.0 / np.cosh(x) ** 2
    xq = np.linspace(0.013, 7.9, 301)
    errs = []
    for n in (128, 256, 512):
        g = make_grid(8.0, n)
        errs.append(np.max(np.abs(interp(EvenProfile(g, f(g.nodes)), xq) - f(xq))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_profile_round_trip():
    g = make_grid(3.0, 20)
    p = EvenProfile(g, np.exp(-g.nodes))
    q = profile_from_json(p.to_json())
    assert q.grid.same_as(g) and np.array_equal(q.samples, p.samples)
    r = profile_from_csv(p.to_csv(), g)
    assert np.array_equal(r.samples, p.samples)


profiles = st.lists(st.floats(-5, 5, allow_nan=False), min_size=17, max_size=17).map(np.array)


@settings(max_examples=50, deadline=None)
@given(profiles, profiles)
def test_norm_triangle_and_integral_linearity(a, b):
    g = make_grid(2.0, 16)
    o = make_order(0.8)
    pa, pb = EvenProfile(g, a), EvenProfile(g, b)
    na, nb, nab = xalpha_norm(pa, o), xalpha_norm(pb, o), xalpha_norm(EvenProfile(g, a + b), o)
    assert nab.total <= na.total + nb.total + 1e-9
    assert integrate(EvenProfile(g, 2 * a - b)) == pytest.approx(2 * integrate(pa) - integrate(pb), abs=1e-9)
    d = xalpha_norm(EvenProfile(g, 2 * a), o)
    assert d.l2 == pytest.approx(2 * na.l2, abs=1e-12) and d.sup == pytest.approx(2 * na.sup)
