"""Riemannian gradient descent on gauge fields, recentering, and diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LineSearchStall, NonzeroMean, NotAbelian
from .frames import BerryConnection, BlochFrame, berry_connection
from .functional import (CenterMatrices, center_matrices, frame_terms,
                         gauge_derivatives, phase_centers, recentering_gauge, round_half_to_zero)
from .lattice import KGrid
from .stencil import torus_shift


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 20000
    grad_tol: float = 1e-9
    armijo_c: float = 1e-4
    initial_step: float = 1.0
    step_shrink: float = 0.5
    recenter_every: int = 100
    seed: int = 0
    fd_check_every: int = 50

    def __post_init__(self):
        if self.max_iter < 1 or self.recenter_every < 0 or self.fd_check_every < 0:
            raise ConfigError("optimizer iteration counts must be positive")
        if not (self.grad_tol > 0 and self.initial_step > 0):
            raise ConfigError("grad_tol and initial_step must be positive")
        if not 0 < self.armijo_c < 0.5:
            raise ConfigError("armijo_c must lie in (0, 1/2)")
        if not 0 < self.step_shrink < 1:
            raise ConfigError("step_shrink must lie in (0, 1)")


@dataclass
class DescentTrace:
    objective: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    recenterings: list = field(default_factory=list)
    fd_checks: list = field(default_factory=list)
    gauge: np.ndarray = None
    converged: bool = False
    el_residual: float = float("nan")

    @property
    def final_objective(self) -> float:
        return self.objective[-1]

    def rows(self):
        return [{"iter": i, "F": f, "gradNorm": g, "step": s}
                for i, (f, g, s) in enumerate(zip(self.objective, self.grad_norm, self.step))]


def _mean_norm(g) -> float:
    return float(np.sqrt(np.mean(np.sum(np.abs(g) ** 2, axis=(1, 2)))))


def inner(g, psi) -> float:
    """Quadrature pairing ``mean_k Re tr(g^* psi)``."""
    return float(np.mean(np.einsum("kab,kab->k", g.conj(), psi).real))


def value(gauge, frame: BlochFrame) -> float:
    phi = frame.with_gauge(gauge)
    quad, cen, _ = frame_terms(phi)
    return float(np.sum(quad) - np.sum(cen ** 2))


def value_and_gradient(gauge, frame: BlochFrame):
    """Objective and Riemannian gradient for right perturbations ``U exp(eps psi)``."""
    phi = frame.with_gauge(gauge)
    quad, cen, resid = frame_terms(phi, want_grad=True)
    b = np.einsum("kga,kgb->kab", phi.coeffs.conj(), resid)
    g = b - np.conj(np.swapaxes(b, 1, 2))
    return float(np.sum(quad) - np.sum(cen ** 2)), g


def riemannian_gradient(gauge, frame: BlochFrame) -> np.ndarray:
    return value_and_gradient(gauge, frame)[1]


def gradient_norm(gauge, frame: BlochFrame) -> float:
    return _mean_norm(riemannian_gradient(gauge, frame))


def expm_skew(psi, t: float = 1.0):
    """``exp(t psi)`` for skew-Hermitian ``psi[k]`` via eigendecomposition of ``i psi``."""
    herm = 1j * psi
    herm = 0.5 * (herm + np.conj(np.swapaxes(herm, 1, 2)))
    w, v = np.linalg.eigh(herm)
    return np.einsum("kab,kb,kcb->kac", v, np.exp(-1j * t * w), v.conj())


def retract(gauge, direction, t: float):
    """``U exp(-t direction)``."""
    return np.einsum("kab,kbc->kac", gauge, expm_skew(direction, -t))


def random_skew(nk: int, m: int, rng) -> np.ndarray:
    x = rng.normal(size=(nk, m, m)) + 1j * rng.normal(size=(nk, m, m))
    return 0.5 * (x - np.conj(np.swapaxes(x, 1, 2)))


def random_gauge(nk: int, m: int, seed: int) -> np.ndarray:
    """Haar-random unitary at every k (seeded)."""
    rng = np.random.default_rng(seed)
    z = (rng.normal(size=(nk, m, m)) + 1j * rng.normal(size=(nk, m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r, axis1=1, axis2=2)
    return q * (ph / np.abs(ph))[:, None, :]


def identity_gauge(nk: int, m: int) -> np.ndarray:
    return np.tile(np.eye(m, dtype=complex), (nk, 1, 1))


def fd_directional(gauge, frame: BlochFrame, psi, eps: float = 1e-5) -> float:
    """Central difference of ``F(U exp(eps psi))`` along ``psi``."""
    plus = value(retract(gauge, psi, -eps), frame)
    minus = value(retract(gauge, psi, eps), frame)
    return (plus - minus) / (2 * eps)


def recenter(gauge, frame: BlochFrame):
    """Move every phase center into the centered cell.

    Returns the new gauge and the integer lattice shifts that were removed.
    """
    phi = frame.with_gauge(gauge)
    shifts = round_half_to_zero(phase_centers(phi)).astype(int)
    if not np.any(shifts):
        return gauge, shifts
    rg = recentering_gauge(frame.grid, shifts)
    return np.einsum("kab,kbc->kac", gauge, rg), shifts


WOLFE_DELTA = 0.1  # sufficient-decrease constant of the gradient-based acceptance test


def rounding_scale(gauge, frame: BlochFrame) -> float:
    """Size of the summands of the objective, which sets its rounding noise."""
    quad, _, _ = frame_terms(frame.with_gauge(gauge))
    return float(np.sum(quad))


def minimize(frame: BlochFrame, cfg: OptimizerConfig = OptimizerConfig(), start="identity"
             ) -> DescentTrace:
    """Gradient descent with backtracking on the discrete spread functional.

    A step is accepted when it satisfies the Armijo condition or, once the
    predicted decrease falls below rounding level, the approximate Wolfe
    condition computed from gradients.  Rounding level is measured against
    the quadratic term, which can exceed the objective by orders of
    magnitude when the centers sit far from the origin.
    """
    grid = frame.grid
    nk, m = grid.npoints, frame.m
    if isinstance(start, str):
        if start == "identity":
            gauge = identity_gauge(nk, m)
        elif start == "random":
            gauge = random_gauge(nk, m, cfg.seed)
        else:
            raise ConfigError(f"unknown start {start!r}")
    else:
        gauge = np.array(start, dtype=complex)
    rng = np.random.default_rng(cfg.seed + 1)
    trace = DescentTrace()
    gauge, shifts = recenter(gauge, frame)
    if np.any(shifts):
        trace.recenterings.append((0, shifts.tolist()))
    f, g = value_and_gradient(gauge, frame)
    gn = _mean_norm(g)
    alpha = cfg.initial_step
    trace.objective.append(f)
    trace.grad_norm.append(gn)
    trace.step.append(0.0)
    tiny = 64 * np.finfo(float).eps
    noise = tiny * max(abs(f), rounding_scale(gauge, frame))
    for it in range(1, cfg.max_iter + 1):
        if gn <= cfg.grad_tol:
            new_gauge, shifts = recenter(gauge, frame)
            if not np.any(shifts):
                trace.converged = True
                break
            gauge = new_gauge
            trace.recenterings.append((it, shifts.tolist()))
            f, g = value_and_gradient(gauge, frame)
            gn = _mean_norm(g)
            noise = tiny * max(abs(f), rounding_scale(gauge, frame))
        if cfg.fd_check_every and it % cfg.fd_check_every == 0:
            psi = random_skew(nk, m, rng)
            exact = inner(g, psi)
            fd = fd_directional(gauge, frame, psi)
            trace.fd_checks.append((it, exact, fd))
        t = min(cfg.initial_step, alpha / cfg.step_shrink)
        slope = gn * gn
        while True:
            cand = retract(gauge, g, t)
            fc, gc = value_and_gradient(cand, frame)
            if fc <= f - cfg.armijo_c * t * slope:
                break
            if fc <= f + noise and inner(gc, g) >= -(1 - 2 * WOLFE_DELTA) * slope:
                break
            t *= cfg.step_shrink
            if t < 1e-14:
                raise LineSearchStall(
                    f"backtracking failed at iteration {it}: F={f:.17g}, gradNorm={gn:.3g}")
        if fc > f + noise:
            raise LineSearchStall(f"objective increased at iteration {it}")
        gauge, f, g, alpha = cand, fc, gc, t
        gn = _mean_norm(g)
        if cfg.recenter_every and it % cfg.recenter_every == 0:
            new_gauge, shifts = recenter(gauge, frame)
            if np.any(shifts):
                gauge = new_gauge
                trace.recenterings.append((it, shifts.tolist()))
                f, g = value_and_gradient(gauge, frame)
                gn = _mean_norm(g)
                noise = tiny * max(abs(f), rounding_scale(gauge, frame))
        trace.objective.append(f)
        trace.grad_norm.append(gn)
        trace.step.append(t)
    else:
        trace.converged = gn <= cfg.grad_tol
    trace.gauge = gauge
    return trace


def _laplacian_apply(field_, grid: KGrid, coef):
    """Second-order stencil Laplacian of a torus field (cartesian)."""
    d = grid.dim
    out = np.zeros_like(field_)
    for c in range(coef.shape[0]):
        for i in range(d):
            for j in range(d):
                w = coef[c, i] * coef[c, j]
                if w == 0.0:
                    continue
                if i == j:
                    n = grid.sizes[i]
                    out += w * n * n * (torus_shift(field_, grid, i, 1) - 2 * field_
                                        + torus_shift(field_, grid, i, -1))
                else:
                    ni, nj = grid.sizes[i], grid.sizes[j]
                    di = 0.5 * ni * (torus_shift(field_, grid, i, 1) - torus_shift(field_, grid, i, -1))
                    out += w * 0.5 * nj * (torus_shift(di, grid, j, 1) - torus_shift(di, grid, j, -1))
    return out


def _divergence(conn_values, grid: KGrid, coef):
    """``sum_c d_c A_c`` by central differences."""
    d = grid.dim
    out = np.zeros_like(conn_values[0])
    for c in range(coef.shape[0]):
        for i in range(d):
            if coef[c, i] == 0.0:
                continue
            n = grid.sizes[i]
            out += coef[c, i] * 0.5 * n * (torus_shift(conn_values[c], grid, i, 1)
                                          - torus_shift(conn_values[c], grid, i, -1))
    return out


def el_residual(gauge, frame: BlochFrame, conn: BerryConnection | None = None,
                centers: CenterMatrices | None = None, include_centers: bool = True,
                return_field: bool = False):
    """Quadrature norm of the continuum Euler-Lagrange operator on the grid."""
    conn = berry_connection(frame) if conn is None else conn
    centers = center_matrices(gauge, frame, conn) if centers is None else centers
    grid, coef = frame.grid, frame.stencil.coef
    a = conn.values
    u = np.asarray(gauge, dtype=complex)
    uinv = np.conj(np.swapaxes(u, 1, 2))
    du = gauge_derivatives(u, grid, coef)
    lap = _laplacian_apply(u, grid, coef)
    res = -lap - _divergence(a, grid, coef) @ u
    for c in range(coef.shape[0]):
        res += du[c] @ uinv @ du[c]
        res += du[c] @ uinv @ a[c] @ u - a[c] @ du[c]
        if include_centers:
            gmat = np.diag(centers.diag[c])
            cov = du[c] + a[c] @ u
            res += -cov @ gmat + u @ gmat @ uinv @ cov
    norm = float(np.sqrt(np.mean(np.sum(np.abs(res) ** 2, axis=(1, 2)))))
    return (norm, res) if return_field else norm


@dataclass
class OracleResult:
    gauge: np.ndarray = field(repr=False)
    objective: float = float("nan")
    poisson_objective: float = float("nan")
    winding: tuple = ()
    sector_objectives: dict = field(default_factory=dict)
    grad_norm: float = float("nan")
    poisson_grad_norm: float = float("nan")


def _laplacian_symbol(grid: KGrid, coef):
    d = grid.dim
    axes = [np.fft.fftfreq(n, 1.0 / n) for n in grid.sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    sym = np.zeros(grid.sizes)
    for c in range(coef.shape[0]):
        for i in range(d):
            for j in range(d):
                w = coef[c, i] * coef[c, j]
                if w == 0.0:
                    continue
                ti = 2 * np.pi * mesh[i] / grid.sizes[i]
                if i == j:
                    sym += -w * (2 * grid.sizes[i] * np.sin(ti / 2)) ** 2
                else:
                    tj = 2 * np.pi * mesh[j] / grid.sizes[j]
                    sym += -w * grid.sizes[i] * np.sin(ti) * grid.sizes[j] * np.sin(tj)
    return sym


class _PhaseObjective:
    """Spread functional of ``chi exp(i f)`` for one band as an explicit function of ``f``.

    Built from precomputed overlaps of the reference frame with its shifted
    copies; independent of the kernel used by the descent.
    """

    def __init__(self, frame: BlochFrame):
        st = frame.stencil
        grid = frame.grid
        d = grid.dim
        chi = frame.coeffs[:, :, 0]
        self.nk = grid.npoints
        self.zc, self.xc = st.zcoef, st.xcoef
        up = [st.shift(frame.coeffs, i, 1)[:, :, 0] for i in range(d)]
        dn = [st.shift(frame.coeffs, i, -1)[:, :, 0] for i in range(d)]
        vecs = np.stack([chi] + up, axis=1)  # (nk, d+1, npw)
        self.gram = np.einsum("kpg,kqg->kpq", vecs.conj(), vecs)
        self.mup = np.array([np.einsum("kg,kg->k", chi.conj(), s) for s in up])
        self.mdn = np.array([np.einsum("kg,kg->k", chi.conj(), s) for s in dn])
        self.nbr_up = np.array([grid.neighbor_table(i, 1)[0] for i in range(d)])
        self.nbr_dn = np.array([grid.neighbor_table(i, -1)[0] for i in range(d)])
        self.idx = np.stack([np.arange(self.nk)] + list(self.nbr_up), axis=1)  # (nk, d+1)

    def __call__(self, f):
        nk = self.nk
        u = np.exp(1j * f)
        uu = u[self.idx]  # (nk, d+1)
        grad = np.zeros(nk)
        quad = 0.0
        for c in range(self.zc.shape[0]):
            alpha = np.concatenate([-self.zc[c].sum() * uu[:, :1], self.zc[c][None, :] * uu[:, 1:]],
                                   axis=1)
            galpha = np.einsum("kpq,kq->kp", self.gram, alpha)
            quad += np.sum(np.einsum("kp,kp->k", alpha.conj(), galpha).real) / nk
            w = -2 * np.imag(alpha * galpha.conj()) / nk
            grad += np.bincount(self.idx.ravel(), weights=w.ravel(), minlength=nk)
        cen_sq = 0.0
        for c in range(self.xc.shape[0]):
            terms_up = 1j * self.xc[c][:, None] * u[self.nbr_up] * self.mup * u.conj()[None, :]
            terms_dn = -1j * self.xc[c][:, None] * u[self.nbr_dn] * self.mdn * u.conj()[None, :]
            cen = (np.sum(terms_up.real) + np.sum(terms_dn.real)) / nk
            cen_sq += cen * cen
            dcen = np.zeros(nk)
            for terms, nbr in ((terms_up, self.nbr_up), (terms_dn, self.nbr_dn)):
                re_i = np.real(1j * terms) / nk
                dcen += np.bincount(nbr.ravel(), weights=re_i.ravel(), minlength=nk)
                dcen -= re_i.sum(axis=0)
            grad -= 2 * cen * dcen
        return quad - cen_sq, grad


def _newton_polish(obj, f, max_iter: int = 12, tol: float = 1e-12, h: float = 1e-5):
    """Newton iterations with a Hessian from central differences of the gradient.

    The global phase is a null direction; the least-squares solve discards it.
    """
    f = np.array(f, dtype=float)
    n = f.size
    for _ in range(max_iter):
        _, g = obj(f)
        if n * np.sqrt(np.mean(g * g)) <= tol:
            break
        hess = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            hess[:, j] = (obj(f + e)[1] - obj(f - e)[1]) / (2 * h)
        hess = 0.5 * (hess + hess.T)
        step = np.linalg.lstsq(hess, -g, rcond=1e-10)[0]
        f = f + step
    return f


def abelian_poisson_oracle(frame: BlochFrame, conn: BerryConnection | None = None,
                           max_winding: int = 2, polish: bool = True) -> OracleResult:
    """Single-band minimizer from the Poisson equation for the phase.

    The phase ``f`` solves ``lap f = i div A`` with the stencil Laplacian,
    diagonalized by the discrete Fourier transform.  Winding sectors
    ``exp(i k.gamma)`` with integer components up to ``max_winding`` are
    compared and the best one is kept.  With ``polish`` the phase is then
    driven to a discrete stationary point by Newton iterations on an
    explicit formula for the objective in terms of ``f``.
    """
    if frame.m != 1:
        raise NotAbelian(f"Poisson oracle requires a single band, got m={frame.m}")
    conn = berry_connection(frame) if conn is None else conn
    grid, coef = frame.grid, frame.stencil.coef
    rhs = (1j * _divergence(conn.values, grid, coef)[:, 0, 0]).real
    mean = float(np.mean(rhs))
    if not abs(mean) <= 1e-8:
        raise NonzeroMean(f"mean of the Poisson source is {mean:.3g}")
    rhs = rhs - mean
    sym = _laplacian_symbol(grid, coef)
    rhat = np.fft.fftn(rhs.reshape(grid.sizes))
    fhat = np.where(np.abs(sym) > 1e-12, rhat / np.where(sym == 0, 1, sym), 0.0)
    f = np.fft.ifftn(fhat).real.ravel()
    best = None
    sectors = {}
    for ell in itertools.product(range(-max_winding, max_winding + 1), repeat=grid.dim):
        phase = f + grid.points @ (np.asarray(ell, float) @ grid.lattice.basis)
        gauge = np.exp(1j * phase)[:, None, None]
        val = value(gauge, frame)
        sectors[tuple(int(v) for v in ell)] = val
        if best is None or val < best[0]:
            best = (val, ell, phase)
    val, ell, phase = best
    res = OracleResult(gauge=np.exp(1j * phase)[:, None, None], objective=val,
                       poisson_objective=val, winding=tuple(int(v) for v in ell),
                       sector_objectives=sectors)
    res.poisson_grad_norm = gradient_norm(res.gauge, frame)
    res.grad_norm = res.poisson_grad_norm
    if polish:
        phase = _newton_polish(_PhaseObjective(frame), phase)
        gauge = np.exp(1j * phase)[:, None, None]
        res.gauge = gauge
        res.objective = value(gauge, frame)
        res.grad_norm = gradient_norm(gauge, frame)
    return res
