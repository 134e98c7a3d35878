"""Window projectors, reference Bloch frames and the discrete Berry connection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProjection, NonOrthonormalInput, TransportGap
from .fiber import BandWindow, FiberSpectrum, PlaneWaveBasis
from .lattice import TWO_PI, KGrid
from .stencil import Stencil


@dataclass(frozen=True)
class WindowProjector:
    """Per-k isometries ``V(k)`` (npw x m) with ``P(k) = V V^*``."""

    vectors: np.ndarray = field(repr=False)  # (nk, npw, m)

    @property
    def rank(self) -> int:
        return self.vectors.shape[2]

    def matrix(self, index: int) -> np.ndarray:
        v = self.vectors[index]
        return v @ v.conj().T

    def apply(self, index: int, x):
        v = self.vectors[index]
        return v @ (v.conj().T @ x)


def window_projector(spec: FiberSpectrum, window: BandWindow) -> np.ndarray:
    """Isometry spanning the window eigenvectors at one k-point."""
    return spec.eigenvectors[:, window.bands].copy()


def window_projectors(spectra, window: BandWindow) -> WindowProjector:
    return WindowProjector(np.array([window_projector(s, window) for s in spectra]))


def riesz_projector(hmat, center: float, radius: float, nodes: int = 64) -> np.ndarray:
    """Spectral projector from the trapezoid rule on a circle in the complex plane.

    ``P = (1/2 pi i) oint (z - H)^{-1} dz`` over the circle ``|z - center| = radius``.
    """
    n = hmat.shape[0]
    eye = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for t in TWO_PI * np.arange(nodes) / nodes:
        e = np.exp(1j * t)
        acc += e * np.linalg.inv((center + radius * e) * eye - hmat)
    return radius * acc / nodes


@dataclass(frozen=True)
class BlochFrame:
    """Orthonormal frame ``coeffs[k, G, a]`` over the centered zone.

    Values outside the zone follow from tau-equivariance, applied through
    the stencil gathers.
    """

    stencil: Stencil
    coeffs: np.ndarray = field(repr=False)

    @property
    def grid(self) -> KGrid:
        return self.stencil.grid

    @property
    def basis(self) -> PlaneWaveBasis:
        return self.stencil.basis

    @property
    def m(self) -> int:
        return self.coeffs.shape[2]

    def orthonormality_error(self) -> float:
        gram = np.einsum("kga,kgb->kab", self.coeffs.conj(), self.coeffs)
        return float(np.abs(gram - np.eye(self.m)).max())

    def check_orthonormal(self, tol: float = 1e-8):
        err = self.orthonormality_error()
        if err > tol:
            raise NonOrthonormalInput(f"frame columns deviate from orthonormal by {err:.3g}")

    def with_gauge(self, gauge) -> "BlochFrame":
        """Frame ``chi U`` with ``phi_a = sum_b chi_b U_ba``."""
        return BlochFrame(self.stencil, np.einsum("kgb,kba->kga", self.coeffs, gauge))


def lowdin(mat):
    """Symmetric orthonormalization ``M (M^* M)^{-1/2}``; also returns singular values."""
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return u @ vh, s


def density_centers(trial, basis: PlaneWaveBasis) -> np.ndarray:
    """Reduced circular means of ``|t_a(y)|^2`` over one cell, shape (m, d)."""
    trial = np.asarray(trial)
    d = basis.lattice.dim
    out = np.zeros((trial.shape[1], d))
    for i in range(d):
        e = np.zeros(d, dtype=int)
        e[i] = 1
        table = basis.shift_table(-e)
        ok = table >= 0
        # integral of |t|^2 exp(i b_i.y) over the cell
        moment = np.einsum("ga,ga->a", trial[ok].conj(), trial[table[ok]])
        out[:, i] = np.angle(moment) / TWO_PI
    return out


def windowed_trial(trial, k, basis: PlaneWaveBasis, centers) -> np.ndarray:
    """Bloch coefficients at ``k`` of the cell-windowed trial orbitals.

    Each column of ``trial`` is read as a periodic function, cut off to the
    unit cell centered at its reduced position ``centers[a]``.  The result
    is analytic in ``k``, tau-equivariant, and equals ``trial`` at k=0.
    """
    trial = np.asarray(trial, dtype=complex)
    lat = basis.lattice
    q = np.asarray(k, float)[None, None, :] + basis.gvectors[:, None, :] - basis.gvectors[None, :, :]
    qred = lat.k_to_reduced(q)  # (npw, npw, d)
    env = np.prod(np.sinc(qred), axis=-1)
    out = np.empty_like(trial)
    for a in range(trial.shape[1]):
        x = np.asarray(centers[a]) @ lat.basis
        phase = np.exp(-1j * (q @ x))
        out[:, a] = (env * phase) @ trial[:, a]
    return out


def projection_frame(projs: WindowProjector, trial, stencil: Stencil,
                     windowed: bool = True, sigma_tol: float = 1e-6):
    """Reference frame by projecting trial orbitals and Löwdin orthonormalizing.

    With ``windowed=True`` the trial columns are first turned into smooth
    tau-equivariant Bloch sections (see :func:`windowed_trial`); otherwise the
    same constant vector is projected at every k.

    Returns
    -------
    frame : BlochFrame
    sigma_min : array of the smallest singular value of ``P(k) t(k)`` per k
    """
    trial = np.asarray(trial, dtype=complex)
    grid, basis = stencil.grid, stencil.basis
    centers = density_centers(trial, basis) if windowed else None
    coeffs = np.empty(projs.vectors.shape, dtype=complex)
    smin = np.empty(grid.npoints)
    for idx, k in enumerate(grid.points):
        t = windowed_trial(trial, k, basis, centers) if windowed else trial
        v = projs.vectors[idx]
        chi, s = lowdin(v @ (v.conj().T @ t))
        smin[idx] = s.min()
        if smin[idx] < sigma_tol:
            raise DegenerateProjection(k, float(smin[idx]))
        coeffs[idx] = chi
    return BlochFrame(stencil, coeffs), smin


def eigenvector_trial(spec: FiberSpectrum, window: BandWindow) -> np.ndarray:
    """Default trial: the window eigenvectors at a single k (normally k=0)."""
    return window_projector(spec, window)


def random_trial(npw: int, m: int, seed: int, nmodes: int | None = None) -> np.ndarray:
    """Seeded random trial supported on the lowest ``nmodes`` plane waves."""
    rng = np.random.default_rng(seed)
    nmodes = npw if nmodes is None else min(nmodes, npw)
    t = np.zeros((npw, m), dtype=complex)
    t[:nmodes] = rng.normal(size=(nmodes, m)) + 1j * rng.normal(size=(nmodes, m))
    return lowdin(t)[0]


@dataclass(frozen=True)
class BerryConnection:
    """Cartesian components ``A[c, k]`` (m x m, skew-Hermitian)."""

    values: np.ndarray = field(repr=False)  # (d, nk, m, m)
    hermitian_defect: np.ndarray = field(default=None)  # (d,) max |A + A^*| before projection


def berry_connection(frame: BlochFrame) -> BerryConnection:
    """``A_c = chi^* d_c chi`` with tau-wrapped central differences."""
    chi = frame.coeffs
    dchi = frame.stencil.cartesian_central(chi)
    raw = np.einsum("kgc,jkgb->jkcb", chi.conj(), dchi)
    herm = raw + np.conj(np.swapaxes(raw, -1, -2))
    defect = np.abs(herm).max(axis=(1, 2, 3))
    return BerryConnection(values=raw - 0.5 * herm, hermitian_defect=defect)


def frame_smoothness(frame: BlochFrame) -> float:
    """``max |chi(k') - chi(k)| / h`` over neighboring grid pairs."""
    st = frame.stencil
    worst = 0.0
    for i in range(frame.grid.dim):
        diff = st.shift(frame.coeffs, i, 1) - frame.coeffs
        norms = np.linalg.norm(diff, axis=(1, 2))
        worst = max(worst, float(norms.max() / frame.grid.spacing[i]))
    return worst


def _shift_isometry(v, basis: PlaneWaveBasis, wrap) -> np.ndarray:
    """Coefficients at ``k + sum wrap_i b_i`` from those at ``k``."""
    if not np.any(wrap):
        return v
    table = basis.shift_table(np.asarray(wrap, dtype=int))
    out = np.zeros_like(v)
    ok = table >= 0
    out[ok] = v[table[ok]]
    return out


def _step_between(grid: KGrid, p: int, q: int):
    for i in range(grid.dim):
        for s in (1, -1):
            nb, w = grid.neighbor(p, i, s)
            if nb == q:
                wrap = np.zeros(grid.dim, dtype=int)
                wrap[i] = w
                return wrap
    raise ValueError(f"grid points {p} and {q} are not neighbors")


@dataclass(frozen=True)
class TransportResult:
    path: tuple
    wraps: np.ndarray = field(repr=False)   # (L, d) cumulative zone crossings
    frames: np.ndarray = field(repr=False)  # (L, npw, m) frames at the actual k

    def holonomy(self, basis: PlaneWaveBasis) -> np.ndarray:
        """``V`` with ``chi_end = tau chi_start V`` for a closed path."""
        start = _shift_isometry(self.frames[0], basis, self.wraps[-1] - self.wraps[0])
        return start.conj().T @ self.frames[-1]


def kato_nagy_transport(projs: WindowProjector, path, grid: KGrid, basis: PlaneWaveBasis,
                        start=None) -> TransportResult:
    """Propagate a frame along a path of neighboring grid points.

    Each step applies ``W = (1 - (P - P0)^2)^{-1/2} P`` to the previous frame,
    which maps Ran P0 isometrically onto Ran P.
    """
    path = tuple(int(p) for p in path)
    chi = projs.vectors[path[0]] if start is None else np.asarray(start, dtype=complex)
    wrap = np.zeros(grid.dim, dtype=int)
    frames, wraps = [chi], [wrap.copy()]
    v0 = projs.vectors[path[0]]
    for step, (p, q) in enumerate(zip(path[:-1], path[1:])):
        wrap = wrap + _step_between(grid, p, q)
        v1 = _shift_isometry(projs.vectors[q], basis, wrap)
        s = np.linalg.svd(v0.conj().T @ v1, compute_uv=False)
        gap = float(np.sqrt(max(0.0, 1.0 - s.min() ** 2)))
        if gap >= 1.0 - 1e-12:
            raise TransportGap(step, gap)
        p0 = v0 @ v0.conj().T
        p1 = v1 @ v1.conj().T
        diff = p1 - p0
        evals, evecs = np.linalg.eigh(np.eye(len(p0)) - diff @ diff)
        root = (evecs / np.sqrt(evals)) @ evecs.conj().T
        chi = root @ (p1 @ chi)
        frames.append(chi)
        wraps.append(wrap.copy())
        v0 = v1
    return TransportResult(path=path, wraps=np.array(wraps), frames=np.array(frames))
