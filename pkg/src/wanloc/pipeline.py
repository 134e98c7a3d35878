"""End-to-end runs shared by the command line and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientDecay
from .fiber import BandWindow, make_basis, solve_grid, validate_gap
from .frames import (BlochFrame, eigenvector_trial, projection_frame, random_trial,
                     window_projectors)
from .functional import eval_gauge_functional
from .lattice import make_kgrid
from .optimizer import OptimizerConfig, abelian_poisson_oracle, el_residual, minimize
from .stencil import make_stencil
from .wannier import attach_lattice_moments, decay_fit, moments, synthesize


@dataclass
class Problem:
    """Everything up to and including the reference frame."""

    grid: object
    basis: object
    spectra: list = field(repr=False)
    window: BandWindow = None
    stencil: object = None
    projectors: object = None
    frame: BlochFrame = None
    sigma_min: np.ndarray = field(default=None, repr=False)


def setup(lattice, potential, sizes, cutoff, window: BandWindow | None, threads: int = 1):
    """Basis, grid and spectra; the gap is validated when a window is given."""
    basis = make_basis(lattice, cutoff)
    grid = make_kgrid(lattice, sizes)
    spectra = solve_grid(grid, basis, potential, threads)
    if window is not None:
        window = validate_gap(spectra, window)
    return Problem(grid=grid, basis=basis, spectra=spectra, window=window)


def build_frame(prob: Problem, trial: str = "eigenvector", seed: int = 0,
                trial_modes: int | None = None, windowed: bool = True) -> Problem:
    if prob.window is None:
        raise ConfigError("a band window is required to build a frame")
    prob.stencil = make_stencil(prob.grid, prob.basis)
    prob.projectors = window_projectors(prob.spectra, prob.window)
    if trial == "eigenvector":
        gi = prob.grid.gamma_index()
        t = eigenvector_trial(prob.spectra[0 if gi is None else gi], prob.window)
    elif trial == "random":
        t = random_trial(prob.basis.size, prob.window.count, seed,
                         trial_modes if trial_modes is not None else min(prob.basis.size, 9))
    else:
        raise ConfigError(f"unknown trial {trial!r}")
    prob.frame, prob.sigma_min = projection_frame(prob.projectors, t, prob.stencil, windowed)
    return prob


def prepare(rc, threads: int = 1, trial: str | None = None, seed: int | None = None) -> Problem:
    """Problem with frame from a :class:`wanloc.config.RunConfig`."""
    prob = setup(rc.lattice, rc.potential, rc.sizes, rc.cutoff, rc.window, threads)
    return build_frame(prob, trial or rc.trial, rc.optimizer.seed if seed is None else seed,
                       rc.trial_modes, rc.windowed)


@dataclass
class LocalizeResult:
    problem: Problem
    trace: object
    report: object
    wannier: object = None
    oracle: object = None
    decay_error: str | None = None


def localize(prob: Problem, cfg: OptimizerConfig, start="identity", samples_per_cell=None,
             with_wannier: bool = True, with_decay: bool = True, oracle: bool = False,
             el: bool = True) -> LocalizeResult:
    """Optimize, then report the functional, Wannier moments and decay."""
    trace = minimize(prob.frame, cfg, start)
    if el:
        trace.el_residual = el_residual(trace.gauge, prob.frame)
    report = eval_gauge_functional(trace.gauge, prob.frame)
    res = LocalizeResult(prob, trace, report)
    if with_wannier:
        ws = moments(synthesize(prob.frame.with_gauge(trace.gauge), samples_per_cell))
        attach_lattice_moments(ws, prob.stencil)
        if with_decay:
            try:
                decay_fit(ws)
            except InsufficientDecay as exc:
                res.decay_error = str(exc)
        res.wannier = ws
    if oracle:
        res.oracle = abelian_poisson_oracle(prob.frame)
    return res
