"""Wannier functions on a periodic supercell: synthesis, moments and decay fits.

The supercell holds ``N_i`` unit cells along each lattice vector, one per
k-point, so the discrete inverse transform is unitary.  Samples sit at
reduced coordinates ``s_i = (j - M_i/2)/S_i`` with ``M_i = N_i S_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CenterDrift, InsufficientDecay
from .frames import BlochFrame
from .lattice import TWO_PI, BravaisLattice


@dataclass(frozen=True)
class Supercell:
    lattice: BravaisLattice
    repetitions: tuple
    samples_per_cell: tuple

    @property
    def dim(self) -> int:
        return len(self.repetitions)

    @property
    def shape(self) -> tuple:
        return tuple(n * s for n, s in zip(self.repetitions, self.samples_per_cell))

    @property
    def cell_measure(self) -> float:
        return self.lattice.cell_volume / float(np.prod(self.samples_per_cell))

    def reduced_axes(self):
        return [(np.arange(m) - m // 2) / s for m, s in zip(self.shape, self.samples_per_cell)]

    def reduced_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.reduced_axes(), indexing="ij")
        return np.stack(mesh, axis=-1)  # shape + (d,)

    def minimal_image(self, red):
        """Wrap reduced displacements into ``[-N_i/2, N_i/2)``."""
        n = np.asarray(self.repetitions, float)
        return (red + n / 2) % n - n / 2

    def inradius(self) -> float:
        """Radius of the largest ball inside the supercell."""
        lat = self.lattice
        widths = [TWO_PI * n / np.linalg.norm(lat.dual_basis[i])
                  for i, n in enumerate(self.repetitions)]
        return 0.5 * min(widths)

    def radius(self) -> float:
        """Distance from the supercell center to its farthest corner."""
        half = 0.5 * np.asarray(self.repetitions, float)[:, None] * self.lattice.basis
        corners = np.array(np.meshgrid(*[[-1, 1]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        return float(np.max(np.linalg.norm(corners @ half, axis=1)))

    def boundary_mask(self, center_reduced) -> np.ndarray:
        """Samples on the outermost layer of the supercell about ``center_reduced``."""
        rel = self.minimal_image(self.reduced_points() - center_reduced)
        n = np.asarray(self.repetitions, float)
        step = 1.0 / np.asarray(self.samples_per_cell, float)
        return np.any(np.abs(rel) >= n / 2 - step - 1e-9, axis=-1)


@dataclass(frozen=True)
class DecayFit:
    beta: float
    r_squared: float
    fit_range: tuple
    npoints: int
    boundary: float = float("nan")  # boundary amplitude over peak

    def to_dict(self) -> dict:
        return {"beta": self.beta, "rSquared": self.r_squared, "boundary": self.boundary,
                "fitRange": list(self.fit_range), "nShells": self.npoints}


@dataclass
class WannierSet:
    supercell: Supercell
    values: np.ndarray = field(repr=False)  # (m,) + supercell shape
    centers: np.ndarray = None              # (m, d) cartesian, minimal-image moments
    spreads: np.ndarray = None              # (m,)
    second_moments: np.ndarray = None       # (m,) sum_c <x_c^2> about the reference origin
    lattice_centers: np.ndarray = None      # (m, d) from the difference-operator symbols
    lattice_spreads: np.ndarray = None      # (m,)
    decay: list = None

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=tuple(range(1, self.values.ndim))) \
            * self.supercell.cell_measure

    def overlaps(self) -> np.ndarray:
        flat = self.values.reshape(self.m, -1)
        return flat.conj() @ flat.T * self.supercell.cell_measure

    def shifted(self, lattice_shift) -> "WannierSet":
        """Circular shift of every band by an integer lattice vector."""
        sc = self.supercell
        shift = tuple(int(n) * s for n, s in zip(lattice_shift, sc.samples_per_cell))
        vals = np.roll(self.values, shift, axis=tuple(range(1, sc.dim + 1)))
        return WannierSet(sc, vals)

    def summary(self) -> dict:
        out = {"centers": self.centers.tolist(), "spreads": self.spreads.tolist(),
               "latticeCenters": self.lattice_centers.tolist(),
               "latticeSpreads": self.lattice_spreads.tolist()}
        if self.decay is not None:
            out["decay"] = [fit.to_dict() for fit in self.decay]
        return out


def default_samples(basis_max_index, dim: int) -> tuple:
    """Samples per cell: 16 (8 in 3-D) raised to resolve the cutoff without aliasing."""
    base = 16 if dim < 3 else 8
    return tuple(max(base, 2 * int(g) + 2) for g in basis_max_index)


def synthesize(phi: BlochFrame, samples_per_cell=None) -> WannierSet:
    """Inverse discrete transform of a frame onto the supercell, by FFT.

    Moments are left unset; see :func:`moments`.
    """
    grid, basis = phi.grid, phi.basis
    d = grid.dim
    if samples_per_cell is None:
        samples_per_cell = default_samples(basis.max_index, d)
    samples_per_cell = tuple(int(s) for s in np.broadcast_to(samples_per_cell, (d,)))
    sc = Supercell(grid.lattice, tuple(grid.sizes), samples_per_cell)
    shape = sc.shape
    sizes = np.asarray(grid.sizes)
    kint = np.rint((grid.reduced + 0.5) * sizes).astype(int)  # (nk, d)
    q = kint[:, None, :] + basis.gint[None, :, :] * sizes  # (nk, npw, d)
    # exp(2 pi i p s) with p = q/N - 1/2 and s = (j - j0)/S, j0 = M//2
    #   = exp(-i pi s) * exp(2 pi i q j / M) * exp(-2 pi i q j0 / M)
    mid = np.array([m // 2 for m in shape]) / np.asarray(shape, float)
    phase = np.exp(-2j * np.pi * np.sum(q * mid, axis=-1))
    flat_idx = np.ravel_multi_index(tuple((q % np.asarray(shape)).reshape(-1, d).T), shape)
    norm = 1.0 / (grid.npoints * np.sqrt(grid.lattice.cell_volume))
    axes = sc.reduced_axes()
    env = np.ones(shape, dtype=complex)
    for i, ax in enumerate(axes):
        sh = [1] * d
        sh[i] = -1
        env = env * np.exp(-1j * np.pi * ax).reshape(sh)
    vals = np.empty((phi.m,) + shape, dtype=complex)
    for a in range(phi.m):
        coeff = (phi.coeffs[:, :, a] * phase).ravel()
        spec = np.bincount(flat_idx, weights=coeff.real, minlength=int(np.prod(shape))) \
            + 1j * np.bincount(flat_idx, weights=coeff.imag, minlength=int(np.prod(shape)))
        vals[a] = np.fft.ifftn(spec.reshape(shape)) * np.prod(shape) * env * norm
    return WannierSet(sc, vals)


def _lattice_moments(ws: WannierSet, zcoef, xcoef):
    """Centers and spreads from the multiplication symbols of the k-space stencils."""
    sc = ws.supercell
    red = sc.reduced_points()
    theta = TWO_PI * red / np.asarray(sc.repetitions, float)
    dens = np.abs(ws.values) ** 2 * sc.cell_measure
    dc = zcoef.shape[0]
    centers = np.zeros((ws.m, dc))
    spreads = np.zeros(ws.m)
    for c in range(dc):
        z = np.zeros(sc.shape, dtype=complex)
        s = np.zeros(sc.shape)
        for i in range(sc.dim):
            z += zcoef[c, i] * (np.exp(-1j * theta[..., i]) - 1)
            s += 2 * xcoef[c, i] * np.sin(theta[..., i])
        for a in range(ws.m):
            centers[a, c] = np.sum(s * dens[a])
            spreads[a] += np.sum(np.abs(z) ** 2 * dens[a]) - centers[a, c] ** 2
    return centers, spreads


def moments(ws: WannierSet, max_iter: int = 5, tol: float = 1e-10) -> WannierSet:
    """Minimal-image first and second moments about each band's own center."""
    sc = ws.supercell
    lat = sc.lattice
    red = sc.reduced_points()
    dens = np.abs(ws.values) ** 2 * sc.cell_measure
    centers = np.zeros((ws.m, sc.dim))
    spreads = np.zeros(ws.m)
    second = np.zeros(ws.m)
    for a in range(ws.m):
        flat = np.argmax(dens[a])
        c = red.reshape(-1, sc.dim)[flat].copy()
        for _ in range(max_iter):
            rel = sc.minimal_image(red - c)
            mean = rel.reshape(-1, sc.dim).T @ dens[a].ravel() / dens[a].sum()
            c = c + mean
            if np.max(np.abs(mean)) < tol:
                break
        else:
            raise CenterDrift(f"band {a}: minimal-image center did not settle in {max_iter} passes")
        rel = (sc.minimal_image(red - c) @ lat.basis).reshape(-1, sc.dim)
        xbar = rel.T @ dens[a].ravel()
        x2 = float(np.sum(rel ** 2, axis=1) @ dens[a].ravel())
        centers[a] = c @ lat.basis + xbar
        second[a] = x2
        spreads[a] = x2 - np.sum(xbar ** 2)
    ws.centers, ws.spreads, ws.second_moments = centers, spreads, second
    return ws


def attach_lattice_moments(ws: WannierSet, stencil) -> WannierSet:
    ws.lattice_centers, ws.lattice_spreads = _lattice_moments(ws, stencil.zcoef, stencil.xcoef)
    return ws


def _shell_profile(ws: WannierSet, band: int, width: float):
    sc = ws.supercell
    red = sc.reduced_points()
    c_red = np.linalg.solve(sc.lattice.basis.T, ws.centers[band])
    rel = sc.minimal_image(red - c_red) @ sc.lattice.basis
    r = np.sqrt(np.sum(rel ** 2, axis=-1)).ravel()
    amp = np.abs(ws.values[band]).ravel()
    shell = np.floor(r / width).astype(int)
    order = np.lexsort((-amp, shell))
    first = np.ones(len(order), dtype=bool)
    first[1:] = shell[order][1:] != shell[order][:-1]
    pick = order[first]
    return r[pick], amp[pick]


def decay_fit(ws: WannierSet, shell_width: float | None = None, boundary_tol: float = 1e-8,
              noise_floor: float = 1e-12, min_shells: int = 8) -> list:
    """Exponential rate from a least-squares line through log shell maxima.

    The fit uses shells with radius in ``[2 diam, 0.4 R]``, ``R`` the supercell
    radius (center to farthest corner), and discards shells below
    ``noise_floor`` times the peak.  Shells are ``shell_width`` thick; by
    default the shortest lattice vector, narrowed so that the window holds
    at least ``min_shells`` of them.

    Raises
    ------
    InsufficientDecay
        If ``|w|`` on the outer layer of the supercell exceeds ``boundary_tol``
        times the peak, or fewer than 3 shells survive.
    """
    sc = ws.supercell
    lat = sc.lattice
    lo, hi = 2 * lat.diameter(), 0.4 * sc.radius()
    if shell_width is None:
        shell_width = float(np.min(np.linalg.norm(lat.basis, axis=1)))
        if hi > lo:
            shell_width = min(shell_width, (hi - lo) / min_shells)
    fits = []
    for a in range(ws.m):
        amp_all = np.abs(ws.values[a])
        peak = amp_all.max()
        c_red = np.linalg.solve(lat.basis.T, ws.centers[a])
        edge = amp_all[sc.boundary_mask(c_red)].max() / peak
        if edge > boundary_tol:
            raise InsufficientDecay(
                f"band {a}: amplitude {edge:.3g} x peak at the supercell boundary")
        r, amp = _shell_profile(ws, a, shell_width)
        keep = (r >= lo) & (r <= hi) & (amp > noise_floor * peak)
        if keep.sum() < 3:
            raise InsufficientDecay(f"band {a}: only {int(keep.sum())} shells in the fit window")
        x, y = r[keep], np.log(amp[keep] / peak)
        slope, icpt = np.polyfit(x, y, 1)
        pred = slope * x + icpt
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        fits.append(DecayFit(beta=float(-slope), r_squared=r2, boundary=float(edge),
                             fit_range=(float(x.min()), float(x.max())), npoints=int(keep.sum())))
    ws.decay = fits
    return fits
