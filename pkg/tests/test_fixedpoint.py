import math

import numpy as np
import pytest

from conftest import oracle, sech_profile, solved
from fracgelfand.fixedpoint import (
    GridPolicyExhausted,
    NonConvergenceError,
    ShootingParams,
    SolveOptions,
    apply_T,
    default_params,
    frechet_apply,
    newton_refine,
    picard_solve,
    recover_u,
    rescale_solution,
    solution_from_profile,
)
from fracgelfand.grid import EvenProfile, interp, make_grid
from fracgelfand.params import make_order
from fracgelfand.riesz import build_moments
from fracgelfand.weight import constant, polynomial


def test_T_of_zero_is_gaussian():
    g = make_grid(10.0, 64)
    p = default_params(0.75, 1.0, 1.0)
    out = apply_T(EvenProfile(g, np.zeros(65)), p, build_moments(g, p.order))
    assert np.allclose(out.samples, np.exp(-g.nodes**2 / 2), rtol=1e-14)


def test_T_anchor_and_sech_fixed_point():
    g = make_grid(30.0, 2048)
    p = default_params(1.0)
    m = build_moments(g, p.order)
    v = EvenProfile(g, sech_profile(g.nodes))
    out = apply_T(v, p, m)
    assert out.samples[0] == 1.0
    assert np.max(np.abs(out.samples - v.samples)) < 1e-5
    q = ShootingParams(2.5, 0.3, polynomial(1.0), make_order(0.8))
    assert apply_T(v, q, build_moments(g, q.order)).samples[0] == pytest.approx(2.5, rel=1e-15)


def test_oracle_solution():
    sol = oracle()
    assert np.max(np.abs(sol.v.samples - sech_profile(sol.grid.nodes))) <= 5e-5
    assert abs(sol.u.samples[0]) <= 1e-6
    assert sol.mass == pytest.approx(2 * math.sqrt(2), abs=1e-5)
    u_exact = -2 * np.log(np.cosh(sol.grid.nodes / math.sqrt(2)))
    assert np.max(np.abs(recover_u(sol.v, constant(1.0)).samples - u_exact)) < 1e-4


def test_three_quarters_invariants():
    sol = solved(0.75)
    v = sol.v.samples
    assert v[0] == pytest.approx(1.0, rel=1e-12)
    assert np.all(v > 0) and np.all(np.diff(v) <= 0)
    assert sol.residual <= 1e-9
    assert sol.tail_ratio <= sol.options.tail_tol


def test_gaussian_envelope():
    sol = solved(0.75, 1.0, 1.0)
    x = sol.grid.nodes
    assert np.max(sol.v.samples) <= 1.0 + 1e-12
    assert np.all(sol.log_v <= -0.5 * x**2 + 1e-9)


def test_frechet_basics():
    sol = oracle(512, 20.0)
    m = sol.get_moments()
    zero = EvenProfile(sol.grid, np.zeros(sol.grid.n + 1))
    assert np.all(frechet_apply(sol.v, zero, sol.params, m).samples == 0)
    h = EvenProfile(sol.grid, np.exp(-sol.grid.nodes))
    d = frechet_apply(sol.v, h, sol.params, m).samples
    assert d[0] == 0.0
    eps = 1e-5
    plus = apply_T(EvenProfile(sol.grid, sol.v.samples + eps * sol.v.samples), sol.params, m).samples
    minus = apply_T(EvenProfile(sol.grid, sol.v.samples - eps * sol.v.samples), sol.params, m).samples
    fd = (plus - minus) / (2 * eps)
    dv = frechet_apply(sol.v, sol.v, sol.params, m).samples
    assert np.max(np.abs(dv - fd)) / np.max(np.abs(fd)) < 1e-6


def test_newton_from_loose_picard():
    p = default_params(0.75)
    o = SolveOptions(n=512, tol=1e-6, newton=False)
    loose = picard_solve(p, o)
    tight = newton_refine(p, loose.v, SolveOptions(n=512), loose.get_moments())
    assert tight.residual <= 1e-10
    again = newton_refine(p, tight.v, SolveOptions(n=512), tight.get_moments())
    assert np.max(np.abs(again.v.samples - tight.v.samples)) < 1e-12


def test_rescale_identity_and_oracle():
    sol = oracle()
    assert rescale_solution(sol, 1.0) is sol
    r = rescale_solution(sol, 2.0)
    assert r.params.lam == 2.0
    assert np.max(np.abs(r.v.samples - 2 / np.cosh(math.sqrt(2) * r.grid.nodes))) < 2e-4
    assert r.mass / sol.mass == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValueError):
        rescale_solution(solved(0.75, 1.0, 0.0, 256, 60.0), -1.0)


def test_doubling_lambda_shifts_u0():
    a, b = solved(0.9, 1.0, 0.0, 512), solved(0.9, 2.0, 0.0, 512)
    assert b.u.samples[0] - a.u.samples[0] == pytest.approx(2 * math.log(2), abs=1e-12)


def test_recover_u_guards():
    g = make_grid(1.0, 16)
    assert np.allclose(recover_u(EvenProfile(g, np.ones(17)), constant(1.0)).samples, 0.0)
    with pytest.raises(ValueError):
        recover_u(EvenProfile(g, -np.ones(17)), constant(1.0))


def test_nonconvergence_and_grid_errors():
    p = default_params(0.75)
    with pytest.raises(NonConvergenceError) as exc:
        picard_solve(p, SolveOptions(n=256, max_iter=2, newton=False, anderson_depth=0))
    assert len(exc.value.residual_history) >= 1
    with pytest.raises(GridPolicyExhausted):
        picard_solve(p, SolveOptions(n=256, max_enlarge=0))
    g = make_grid(10.0, 64)
    with pytest.raises(ValueError):
        picard_solve(p, SolveOptions(n=64, L=10.0), v0=EvenProfile(g, np.zeros(65)))


def test_options_validation():
    for bad in (dict(tol=0), dict(damping=0), dict(L=-1.0), dict(n=8), dict(stretch=-2.0), dict(tail_tol=2.0)):
        with pytest.raises(ValueError):
            SolveOptions(**bad)
    with pytest.raises(ValueError):
        ShootingParams(-1.0, 0.0, constant(1.0), make_order(0.75))


def test_nonconstant_weight_solve():
    p = ShootingParams(1.0, 0.0, polynomial(1.0), make_order(0.75))
    sol = picard_solve(p, SolveOptions(n=512))
    assert sol.v.samples[0] == pytest.approx(1.0)
    assert np.all(np.diff(sol.v.samples) <= 0)
    with pytest.raises(ValueError):
        rescale_solution(sol, 2.0)


def test_solution_from_profile_round_trip():
    sol = solved(0.75, 1.0, 0.0, 512)
    back = solution_from_profile(sol.params, sol.v, sol.options)
    assert back.residual <= 1e-9
    assert back.mass == sol.mass


def test_warm_start_matches_cold():
    a = solved(0.6, 1.0, 0.0, 512)
    b = picard_solve(a.params, a.options, v0=solved(0.6, 1.2, 0.0, 512).v)
    common = a.grid.nodes[a.grid.nodes < 0.5 * min(a.grid.L, b.grid.L)]
    assert np.max(np.abs(interp(a.v, common) - interp(b.v, common))) < 1e-8
