"""Shared fixtures: small band problems and converged Mathieu minimizers."""

from __future__ import annotations

import functools

import numpy as np
import pytest

from wanloc.fiber import BandWindow, preset
from wanloc.optimizer import OptimizerConfig, minimize
from wanloc.pipeline import build_frame, setup


@functools.lru_cache(maxsize=None)
def mathieu_problem(nk: int, amp: float = 0.5, cutoff: float = 8.0, trial: str = "eigenvector",
                    seed: int = 0, windowed: bool = True, first: int = 0, count: int = 1):
    lat, pot = preset("mathieu1d", amp)
    prob = setup(lat, pot, (nk,), cutoff, BandWindow(first, count))
    return build_frame(prob, trial, seed, windowed=windowed)


@functools.lru_cache(maxsize=None)
def mathieu_minimum(nk: int, trial: str = "eigenvector", seed: int = 0, start: str = "identity"):
    prob = mathieu_problem(nk, trial=trial, seed=seed)
    trace = minimize(prob.frame, OptimizerConfig(max_iter=20000, grad_tol=1e-9, seed=seed), start)
    return prob, trace


@functools.lru_cache(maxsize=None)
def cos2d_problem(nk: int = 8, amp: float = 1.0, cutoff: float = 4.0):
    lat, pot = preset("cos2d", amp)
    prob = setup(lat, pot, (nk, nk), cutoff, BandWindow(1, 2))
    return build_frame(prob)


@pytest.fixture(scope="session")
def mathieu32():
    return mathieu_problem(32)


@pytest.fixture(scope="session")
def mathieu64():
    return mathieu_problem(64)


@pytest.fixture(scope="session")
def mathieu_m2():
    return mathieu_problem(32, first=0, count=2)


@pytest.fixture(scope="session")
def cos2d_small():
    return cos2d_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
