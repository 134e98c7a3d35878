"""Plane-wave discretization of the fiber Hamiltonians H(k) = (-i grad + k)^2 + V.

Cell-periodic functions are expanded as ``u(y) = sum_G c_G exp(iG.y)/sqrt|Y|``
with ``G`` running over dual-lattice vectors inside a Euclidean cutoff.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EigFailure, GapViolation
from .lattice import TWO_PI, BravaisLattice, KGrid, build_lattice


@dataclass(frozen=True)
class PlaneWaveBasis:
    lattice: BravaisLattice
    cutoff: float
    gint: np.ndarray = field(repr=False)       # (npw, d) integer components
    gvectors: np.ndarray = field(repr=False)   # (npw, d) cartesian
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.gint)

    @property
    def max_index(self) -> np.ndarray:
        return np.abs(self.gint).max(axis=0)

    def lookup(self, n) -> int:
        return self.index.get(tuple(int(v) for v in n), -1)

    def shift_table(self, shift) -> np.ndarray:
        """Partial permutation ``G -> G + shift`` (``-1`` where it leaves the basis).

        ``shift`` holds integer components along the dual basis.
        """
        shift = np.asarray(shift, dtype=int)
        return np.array([self.lookup(n + shift) for n in self.gint], dtype=np.intp)

    def conj_table(self) -> np.ndarray:
        return np.array([self.index[tuple(-n)] for n in self.gint], dtype=np.intp)

    def apply_tau_inverse(self, coeffs, shift):
        """Coefficients of ``exp(-i lambda.y) u`` for ``lambda = sum shift_j b_j``.

        Entry ``G`` of the result is entry ``G + lambda`` of ``coeffs``;
        components that leave the cutoff set are dropped.
        """
        table = self.shift_table(shift)
        coeffs = np.asarray(coeffs)
        out = np.zeros_like(coeffs)
        ok = table >= 0
        out[ok] = coeffs[table[ok]]
        return out


def make_basis(lat: BravaisLattice, cutoff: float) -> PlaneWaveBasis:
    """All ``G`` in the dual lattice with ``|G| <= cutoff``, sorted by length."""
    d = lat.dim
    bounds = [int(np.floor(cutoff * np.linalg.norm(lat.basis[j]) / TWO_PI + 1e-9)) for j in range(d)]
    cand = np.array(list(itertools.product(*[range(-b, b + 1) for b in bounds])), dtype=int)
    gv = cand @ lat.dual_basis
    norms = np.linalg.norm(gv, axis=1)
    keep = norms <= cutoff * (1 + 1e-12)
    cand, gv, norms = cand[keep], gv[keep], norms[keep]
    order = np.lexsort(tuple(cand[:, j] for j in reversed(range(d))) + (np.round(norms, 12),))
    cand, gv = cand[order], gv[order]
    index = {tuple(int(v) for v in n): i for i, n in enumerate(cand)}
    return PlaneWaveBasis(lattice=lat, cutoff=float(cutoff), gint=cand, gvectors=gv, index=index)


@dataclass(frozen=True)
class PotentialSpec:
    """Fourier coefficients of a real lattice-periodic potential.

    Keys are integer component tuples along the dual basis.
    """

    coeffs: dict

    @classmethod
    def from_coefficients(cls, coeffs, tol=1e-12):
        out = {}
        for key, val in coeffs.items():
            out[tuple(int(v) for v in key)] = complex(val)
        for key, val in list(out.items()):
            mkey = tuple(-v for v in key)
            if mkey in out:
                if abs(out[mkey] - val.conjugate()) > tol * max(1.0, abs(val)):
                    raise ConfigError(
                        f"potential is not real: V[{mkey}] != conj(V[{key}])")
            else:
                out[mkey] = val.conjugate()
        zero = tuple(0 for _ in next(iter(out))) if out else None
        if zero is not None and zero in out and abs(out[zero].imag) > tol:
            raise ConfigError("V[0] must be real")
        return cls(coeffs=out)

    def matrix(self, basis: PlaneWaveBasis) -> np.ndarray:
        """Matrix ``V_{G G'} = V_hat(G - G')`` on the plane-wave basis."""
        npw = basis.size
        mat = np.zeros((npw, npw), dtype=complex)
        diff = basis.gint[:, None, :] - basis.gint[None, :, :]
        for key, val in self.coeffs.items():
            mask = np.all(diff == np.asarray(key), axis=-1)
            mat[mask] = val
        return mat


def cosine_potential(dim: int, amplitude: float) -> PotentialSpec:
    """``V(y) = 2 V0 sum_j cos(b_j . y)``, i.e. ``V_hat(+-b_j) = V0``."""
    coeffs = {}
    for j in range(dim):
        e = [0] * dim
        e[j] = 1
        coeffs[tuple(e)] = amplitude
    return PotentialSpec.from_coefficients(coeffs)


PRESETS = {"mathieu1d": 1, "cos2d": 2, "cos3d": 3}


def preset(name: str, amplitude: float):
    """Square/cubic lattice of spacing 2*pi with a separable cosine potential."""
    if name not in PRESETS:
        raise ConfigError(f"unknown potential preset {name!r}; known: {sorted(PRESETS)}")
    dim = PRESETS[name]
    return build_lattice(TWO_PI * np.eye(dim)), cosine_potential(dim, amplitude)


@dataclass(frozen=True)
class FiberSpectrum:
    k: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class BandWindow:
    first: int
    count: int
    min_gap: float = float("nan")

    @property
    def bands(self) -> slice:
        return slice(self.first, self.first + self.count)


class FiberOperator:
    """Caches the k-independent potential matrix for repeated assembly."""

    def __init__(self, basis: PlaneWaveBasis, pot: PotentialSpec):
        self.basis = basis
        self.pot = pot
        self.vmat = pot.matrix(basis)

    def matrix(self, k) -> np.ndarray:
        kin = np.sum((np.asarray(k, float) + self.basis.gvectors) ** 2, axis=1)
        mat = self.vmat.copy()
        mat[np.diag_indices_from(mat)] += kin
        return mat

    def solve(self, k) -> FiberSpectrum:
        mat = self.matrix(k)
        if not np.all(np.isfinite(mat)):
            raise EigFailure(f"non-finite fiber matrix at k={k}")
        try:
            vals, vecs = np.linalg.eigh(mat)
        except np.linalg.LinAlgError as exc:
            raise EigFailure(f"eigendecomposition failed at k={k}: {exc}") from exc
        return FiberSpectrum(k=np.asarray(k, float), eigenvalues=vals, eigenvectors=vecs)


def assemble_fiber(k, basis: PlaneWaveBasis, pot: PotentialSpec) -> np.ndarray:
    return FiberOperator(basis, pot).matrix(k)


def solve_fiber(k, basis: PlaneWaveBasis, pot: PotentialSpec) -> FiberSpectrum:
    return FiberOperator(basis, pot).solve(k)


def solve_grid(grid: KGrid, basis: PlaneWaveBasis, pot: PotentialSpec, threads: int = 1):
    """Spectra at every grid point, in grid order."""
    op = FiberOperator(basis, pot)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(op.solve, grid.points))
    return [op.solve(k) for k in grid.points]


def window_gap(spec: FiberSpectrum, window: BandWindow) -> float:
    """Distance between the window eigenvalues and the rest of the spectrum."""
    e = spec.eigenvalues
    lo, hi = window.first, window.first + window.count
    if hi > len(e):
        raise GapViolation(spec.k, float("nan"))
    gaps = []
    if lo > 0:
        gaps.append(e[lo] - e[lo - 1])
    if hi < len(e):
        gaps.append(e[hi] - e[hi - 1])
    return float(min(gaps)) if gaps else float("inf")


def validate_gap(spectra, window: BandWindow, tol: float = 1e-8) -> BandWindow:
    """Check the gap condition on every spectrum; raise at the worst k-point."""
    gaps = np.array([window_gap(s, window) for s in spectra])
    worst = int(np.argmin(gaps))
    if not gaps[worst] > tol:
        raise GapViolation(spectra[worst].k, float(gaps[worst]))
    return BandWindow(window.first, window.count, float(gaps[worst]))
