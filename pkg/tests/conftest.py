"""Shared solves; each distinct configuration is computed once per session."""

import functools
import math

import numpy as np
import pytest

from fracgelfand.fixedpoint import SolveOptions, default_params, picard_solve


@functools.lru_cache(maxsize=None)
def solved(s, lam=1.0, sigma=0.0, n=2048, L="auto", stretch="auto"):
    return picard_solve(default_params(s, lam, sigma), SolveOptions(n=n, L=L, stretch=stretch))


@functools.lru_cache(maxsize=None)
def oracle(n=2048, L=30.0):
    return solved(1.0, 1.0, 0.0, n=n, L=L)


def sech_profile(x):
    return 1.0 / np.cosh(x / math.sqrt(2.0))


@pytest.fixture(scope="session")
def s1():
    return oracle()


@pytest.fixture(scope="session")
def s075():
    return solved(0.75)
