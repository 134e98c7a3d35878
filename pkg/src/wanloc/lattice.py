"""Bravais lattices, their duals, and uniform k-grids on the Brillouin torus."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGridSize, SingularBasis

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BravaisLattice:
    """Primal and dual lattice bases.

    Rows of ``basis`` are the lattice vectors; rows of ``dual_basis`` satisfy
    ``dual_basis[j] @ basis[i] == 2*pi*delta_ij``.
    """

    basis: np.ndarray
    dual_basis: np.ndarray
    cell_volume: float
    dual_cell_volume: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def to_reduced(self, x):
        """Components of real-space points along the primal basis."""
        return np.asarray(x, float) @ self.dual_basis.T / TWO_PI

    def k_to_reduced(self, k):
        """Components of k-vectors along the dual basis."""
        return np.asarray(k, float) @ self.basis.T / TWO_PI

    def diameter(self) -> float:
        """Length of the longest diagonal of the centered cell."""
        d = self.dim
        corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * d, indexing="ij")).reshape(d, -1).T
        pts = corners @ self.basis
        diffs = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diffs ** 2).sum(-1)).max())


def build_lattice(basis_vectors) -> BravaisLattice:
    """Build a lattice from ``d`` linearly independent vectors in R^d."""
    basis = np.atleast_2d(np.asarray(basis_vectors, dtype=float))
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1] or basis.shape[0] not in (1, 2, 3):
        raise SingularBasis(f"expected d vectors in R^d with d in 1..3, got shape {basis.shape}")
    d = basis.shape[0]
    det = float(np.linalg.det(basis))
    scale = float(np.max(np.linalg.norm(basis, axis=1))) ** d
    if not np.isfinite(det) or scale == 0.0 or abs(det) < 1e-12 * scale:
        raise SingularBasis(f"basis determinant {det:.3g} is numerically zero")
    dual = TWO_PI * np.linalg.inv(basis).T
    vol = abs(det)
    return BravaisLattice(basis=basis, dual_basis=dual, cell_volume=vol,
                          dual_cell_volume=TWO_PI ** d / vol)


@dataclass(frozen=True)
class KGrid:
    """Uniform grid ``k = sum_j (n_j/N_j - 1/2) b_j`` over the centered zone.

    Points are stored flattened in C order over ``(n_1, ..., n_d)``.
    """

    lattice: BravaisLattice
    sizes: tuple
    reduced: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def spacing(self) -> np.ndarray:
        return np.linalg.norm(self.lattice.dual_basis, axis=1) / np.asarray(self.sizes)

    @property
    def weight(self) -> float:
        """Quadrature weight |Y*|/N of a single point."""
        return self.lattice.dual_cell_volume / self.npoints

    def multi_index(self, index):
        return np.unravel_index(index, self.sizes)

    def flat_index(self, multi):
        return np.ravel_multi_index(tuple(multi), self.sizes)

    def neighbor(self, index: int, direction: int, step: int = 1):
        """Neighbor of ``index`` along dual axis ``direction``.

        Returns ``(neighbor_index, wrap)`` where ``wrap`` counts how many
        dual basis vectors ``b_direction`` were crossed (the k-vector of the
        neighbor equals ``points[neighbor_index] + wrap * b_direction``).
        """
        multi = list(self.multi_index(index))
        n = multi[direction] + step
        size = self.sizes[direction]
        wrap, multi[direction] = divmod(n, size)
        return int(self.flat_index(multi)), int(wrap)

    def neighbor_table(self, direction: int, step: int = 1):
        """Vectorized :meth:`neighbor` over all points."""
        multi = np.array(np.unravel_index(np.arange(self.npoints), self.sizes))
        n = multi[direction] + step
        wrap, multi[direction] = np.divmod(n, self.sizes[direction])
        return np.ravel_multi_index(tuple(multi), self.sizes), wrap

    def gamma_index(self):
        """Index of k=0, or None if no grid point sits at the origin."""
        if any(n % 2 for n in self.sizes):
            return None
        return int(self.flat_index([n // 2 for n in self.sizes]))


def make_kgrid(lat: BravaisLattice, sizes) -> KGrid:
    sizes = tuple(int(n) for n in np.atleast_1d(sizes))
    if len(sizes) != lat.dim:
        raise InvalidGridSize(f"need {lat.dim} grid sizes, got {len(sizes)}")
    if any(n < 2 for n in sizes):
        raise InvalidGridSize(f"every grid size must be >= 2, got {sizes}")
    axes = [np.arange(n) / n - 0.5 for n in sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    reduced = np.stack([m.ravel() for m in mesh], axis=1)
    points = reduced @ lat.dual_basis
    return KGrid(lattice=lat, sizes=sizes, reduced=reduced, points=points)
