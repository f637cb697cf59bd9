import math

import numpy as np
import pytest

from conftest import sech_profile, solved
from fracgelfand.continuation import (
    ProbeInconclusive,
    continue_lambda,
    continue_sigma,
    sigma_schedule,
    uniqueness_probe,
)
from fracgelfand.fixedpoint import SolveOptions, default_params, picard_solve

O512 = SolveOptions(n=512)


def test_schedule():
    assert sigma_schedule(1e-5) == [0.0]
    sched = sigma_schedule(1.0)
    assert sched[0] == 1.0 and sched[-1] == 0.0
    assert all(a > b for a, b in zip(sched, sched[1:]))
    assert min(t for t in sched if t > 0) >= 1e-4


def test_short_path_when_sigma_tiny():
    path = continue_sigma(default_params(0.75, 1.0, 5e-5), O512)
    assert len(path) == 1 and path.final.sigma == 0.0
    with pytest.raises(ValueError):
        continue_sigma(default_params(0.75, 1.0, 0.0), O512)


def test_sigma_to_oracle():
    o = SolveOptions(n=1024, L=30.0)
    path = continue_sigma(default_params(1.0, 1.0, 1.0), o)
    f = path.final
    assert f.sigma == 0.0
    assert np.max(np.abs(f.v.samples - sech_profile(f.v.grid.nodes))) <= 5e-5
    text = path.to_csv().splitlines()
    assert text[0] == "lambda,sigma,mass,v0,xalpha_total"
    assert len(text) == len(path) + 1
    assert math.isfinite(path.modulus)


def test_lambda_branch_anchor():
    p = default_params(0.75, 0.1, 1.0)
    path = continue_lambda(p, 1.0, O512)
    lams = [pt.lam for pt in path.points]
    assert lams[0] == 0.1 and lams[-1] == 1.0
    assert all(a < b for a, b in zip(lams, lams[1:]))
    for pt in path.points:
        assert pt.v.samples[0] == pytest.approx(pt.lam, rel=1e-12)
    assert len(continue_lambda(p, 0.1, O512)) == 1
    # small-lambda end agrees with a cold solve
    cold = picard_solve(p, O512)
    assert np.max(np.abs(cold.v.samples - path.points[0].v.samples)) < 1e-10


def test_probe():
    p = default_params(0.75)
    assert uniqueness_probe(p, k=3, seed=3, o=O512, workers=3) <= 1e-8
    assert uniqueness_probe(p, k=2, seed=3, o=O512) == uniqueness_probe(p, k=2, seed=3, o=O512)
    with pytest.raises(ValueError):
        uniqueness_probe(p, k=1)
    with pytest.raises(ProbeInconclusive):
        uniqueness_probe(p, k=2, o=SolveOptions(n=256, max_iter=1, newton=False, anderson_depth=0))
