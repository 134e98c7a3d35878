"""Finite-difference stencils on a k-grid with tau-equivariant boundary wraps.

A frame is stored as an array ``phi[k, G, a]`` for k in the centered zone.
Its value at a neighbor that lies outside the zone is obtained from the
equivariance ``phi(k + lam)_G = phi(k)_{G + lam}``; coefficients pushed out
of the cutoff set are dropped.  Shifts are applied as flat gathers from the
frame with one extra zero row appended.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fiber import PlaneWaveBasis
from .lattice import TWO_PI, KGrid


@dataclass(frozen=True)
class Stencil:
    """Gather tables for unit shifts along each reduced k-direction.

    ``fwd[i]`` realizes ``(S_i phi)(k) = phi(k + b_i/N_i)`` and ``bwd[i]``
    its exact adjoint.  ``coef[c, i] = (a_i)_c / (2 pi)`` converts reduced
    derivatives into cartesian ones, ``d/dk_c = sum_i coef[c, i] d/dkappa_i``.
    """

    grid: KGrid
    basis: PlaneWaveBasis
    fwd: np.ndarray = field(repr=False)  # (d, nk*npw) intp
    bwd: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)  # (d, d)

    @property
    def nk(self) -> int:
        return self.grid.npoints

    @property
    def npw(self) -> int:
        return self.basis.size

    @property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.grid.sizes, dtype=float)

    @property
    def zcoef(self) -> np.ndarray:
        """Weights of the forward difference ``N_i (S_i - 1)`` per cartesian axis."""
        return self.coef * self.sizes[None, :]

    @property
    def xcoef(self) -> np.ndarray:
        """Weights of the central difference ``(N_i/2)(S_i - S_i^*)``."""
        return 0.5 * self.coef * self.sizes[None, :]

    def shift(self, phi, direction: int, step: int = 1):
        table = self.fwd[direction] if step > 0 else self.bwd[direction]
        return gather(phi, table)

    def forward_diff(self, phi, direction: int):
        """Reduced-coordinate forward difference ``N_i (S_i - 1) phi``."""
        return self.grid.sizes[direction] * (self.shift(phi, direction, 1) - phi)

    def central_diff(self, phi, direction: int):
        """Reduced-coordinate central difference ``(N_i/2)(S_i - S_i^*) phi``."""
        n = self.grid.sizes[direction]
        return 0.5 * n * (self.shift(phi, direction, 1) - self.shift(phi, direction, -1))

    def cartesian_central(self, phi):
        """Central-difference cartesian derivatives, shape ``(d,) + phi.shape``."""
        red = [self.central_diff(phi, i) for i in range(self.grid.dim)]
        return np.einsum("ci,i...->c...", self.coef, np.array(red))


def gather(phi, table):
    """Apply a flat gather table to ``phi[k, G, ...]`` with zero padding."""
    nk, npw = phi.shape[:2]
    flat = phi.reshape((nk * npw,) + phi.shape[2:])
    padded = np.concatenate([flat, np.zeros((1,) + phi.shape[2:], dtype=phi.dtype)])
    return padded[table].reshape(phi.shape)


def _table(grid: KGrid, basis: PlaneWaveBasis, direction: int, step: int) -> np.ndarray:
    nk, npw = grid.npoints, basis.size
    nbr, wrap = grid.neighbor_table(direction, step)
    tables = {}
    for w in np.unique(wrap):
        shift = np.zeros(grid.dim, dtype=int)
        shift[direction] = w
        tables[int(w)] = basis.shift_table(shift)
    out = np.empty((nk, npw), dtype=np.intp)
    for k in range(nk):
        col = tables[int(wrap[k])]
        out[k] = np.where(col >= 0, nbr[k] * npw + col, nk * npw)
    return out.ravel()


def make_stencil(grid: KGrid, basis: PlaneWaveBasis) -> Stencil:
    d = grid.dim
    fwd = np.array([_table(grid, basis, i, 1) for i in range(d)])
    bwd = np.array([_table(grid, basis, i, -1) for i in range(d)])
    coef = grid.lattice.basis.T / TWO_PI
    return Stencil(grid=grid, basis=basis, fwd=fwd, bwd=bwd, coef=coef)


def torus_shift(field_, grid: KGrid, direction: int, step: int = 1):
    """Periodic neighbor values of a k-field with no tau-phase (gauge fields)."""
    nbr, _ = grid.neighbor_table(direction, step)
    return field_[nbr]
