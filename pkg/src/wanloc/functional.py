"""Discrete spread functional in frame form and in gauge form.

The frame form is the objective that is optimized:

    F(phi) = sum_{c,a} [ <|Z_c phi_a|^2> - <Re <phi_a, i X_c phi_a>>^2 ]

where ``<.>`` is the mean over the k-grid, ``Z_c`` is the cartesian forward
difference and ``X_c`` the cartesian central difference, both with
tau-equivariant wraps.  Under the discrete transform ``Z_c`` and ``i X_c``
become multiplication operators that approximate ``x_c``, so ``F`` is a
variance and is nonnegative.  ``<Re <phi_a, i X_c phi_a>>`` is the
a-th Wannier center.

The gauge form splits the same quantity into a Dirichlet term for ``U``
plus the reference-frame energy, a Berry-connection cross term and the
squared centers.  It is evaluated with central differences and only used
as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .frames import BerryConnection, BlochFrame, berry_connection
from .lattice import TWO_PI, KGrid
from .stencil import torus_shift


@dataclass(frozen=True)
class FunctionalReport:
    total: float
    quadratic: float
    cross: float
    center: float
    per_band: np.ndarray
    centers: np.ndarray = field(default=None, repr=False)  # (m, d) cartesian
    decomposition: "FunctionalReport | None" = field(default=None, repr=False)
    route_discrepancy: float = float("nan")

    def to_dict(self) -> dict:
        out = {
            "total": float(self.total),
            "quadratic": float(self.quadratic),
            "cross": float(self.cross),
            "center": float(self.center),
            "perBand": [float(v) for v in self.per_band],
        }
        if self.centers is not None:
            out["centers"] = [[float(v) for v in row] for row in self.centers]
        if self.decomposition is not None:
            out["decomposition"] = self.decomposition.to_dict()
            out["routeDiscrepancy"] = float(self.route_discrepancy)
        return out


def _coeffs(phi):
    return phi.coeffs if isinstance(phi, BlochFrame) else np.asarray(phi)


def frame_terms(frame: BlochFrame, want_grad: bool = False):
    """Raw kernel output ``(quad, center, resid)`` for a frame."""
    st = frame.stencil
    return kernels.mv_terms(frame.coeffs, st.fwd, st.bwd, st.zcoef, st.xcoef, want_grad)


def eval_frame_functional(phi: BlochFrame, check: bool = True) -> FunctionalReport:
    """Spread functional of a frame given directly in frame form."""
    if check:
        phi.check_orthonormal()
    quad, cen, _ = frame_terms(phi)
    per_band = np.sum(quad - cen ** 2, axis=0)
    quadratic = float(np.sum(quad))
    center = -float(np.sum(cen ** 2))
    return FunctionalReport(total=quadratic + center, quadratic=quadratic, cross=0.0,
                            center=center, per_band=per_band, centers=cen.T.copy())


def gauge_derivatives(gauge, grid: KGrid, coef):
    """Cartesian central differences of a torus field ``U[k]`` (no tau-phase)."""
    red = []
    for i in range(grid.dim):
        n = grid.sizes[i]
        red.append(0.5 * n * (torus_shift(gauge, grid, i, 1) - torus_shift(gauge, grid, i, -1)))
    return np.einsum("ci,i...->c...", coef, np.array(red))


@dataclass(frozen=True)
class CenterMatrices:
    """Diagonals of ``G^c``; entries are purely imaginary."""

    diag: np.ndarray  # (d, m) complex

    def positions(self) -> np.ndarray:
        """Cartesian centers ``i G^c_aa``, shape (m, d)."""
        return (1j * self.diag).real.T.copy()


def center_matrices(gauge, frame: BlochFrame, conn: BerryConnection) -> CenterMatrices:
    """``G^c = diag mean(U^* (d_c U + A_c U))`` keeping the imaginary part."""
    grid = frame.grid
    du = gauge_derivatives(gauge, grid, frame.stencil.coef)
    inner = du + np.einsum("ckab,kbd->ckad", conn.values, gauge)
    mat = np.einsum("kba,ckbd->ckad", gauge.conj(), inner).mean(axis=1)
    diag = np.diagonal(mat, axis1=-2, axis2=-1)
    return CenterMatrices(1j * diag.imag)


def decomposition_report(gauge, frame: BlochFrame, conn: BerryConnection | None = None
                         ) -> FunctionalReport:
    """Gauge-form evaluation with the Berry connection of the reference frame."""
    conn = berry_connection(frame) if conn is None else conn
    grid, st = frame.grid, frame.stencil
    a = conn.values
    du = gauge_derivatives(gauge, grid, st.coef)
    dchi = st.cartesian_central(frame.coeffs)
    dirichlet_u = np.einsum("ckab,ckab->", du.conj(), du).real / grid.npoints
    frame_energy = np.sum(np.abs(dchi) ** 2) / grid.npoints
    udu = np.einsum("kab,ckdb->ckad", gauge, du.conj())      # U dU^*
    duu = np.einsum("ckab,kdb->ckad", du, gauge.conj())      # dU U^*
    cross = np.einsum("ckab,ckba->", udu - duu, a).real / grid.npoints
    cm = center_matrices(gauge, frame, conn)
    per_band_center = np.sum((cm.diag ** 2).real, axis=0)
    # per-band split of the quadratic and cross parts
    dphi = np.einsum("kgb,ckba->ckga", frame.coeffs, du) + np.einsum("ckgb,kba->ckga", dchi, gauge)
    per_band_quad = np.sum(np.abs(dphi) ** 2, axis=(0, 1, 2)) / grid.npoints
    quadratic = float(dirichlet_u + frame_energy)
    center = float(np.sum(per_band_center))
    total = quadratic + float(cross) + center
    return FunctionalReport(total=total, quadratic=quadratic, cross=float(cross), center=center,
                            per_band=per_band_quad + per_band_center, centers=cm.positions())


def eval_gauge_functional(gauge, frame: BlochFrame, conn: BerryConnection | None = None
                          ) -> FunctionalReport:
    """Frame-form value on ``chi U`` with the gauge-form decomposition attached."""
    gauge = np.asarray(gauge, dtype=complex)
    err = np.abs(np.einsum("kba,kbc->kac", gauge.conj(), gauge) - np.eye(gauge.shape[1])).max()
    if err > 1e-8:
        from .errors import NonOrthonormalInput
        raise NonOrthonormalInput(f"gauge is not unitary (error {err:.3g})")
    main = eval_frame_functional(frame.with_gauge(gauge))
    dec = decomposition_report(gauge, frame, conn)
    return FunctionalReport(total=main.total, quadratic=main.quadratic, cross=main.cross,
                            center=main.center, per_band=main.per_band, centers=main.centers,
                            decomposition=dec, route_discrepancy=abs(main.total - dec.total))


def phase_centers(phi: BlochFrame) -> np.ndarray:
    """Reduced Wannier centers from the phase of the neighbor overlaps, shape (m, d).

    ``c_i = -(N_i / 2 pi) arg mean_k <phi_a(k), phi_a(k + b_i/N_i)>``; the
    values lie in ``(-N_i/2, N_i/2]``.
    """
    st = phi.stencil
    out = np.empty((phi.m, phi.grid.dim))
    for i in range(phi.grid.dim):
        ov = np.einsum("kga,kga->a", phi.coeffs.conj(), st.shift(phi.coeffs, i, 1))
        out[:, i] = -phi.grid.sizes[i] * np.angle(ov) / TWO_PI
    return out


def recentering_gauge(grid: KGrid, shifts) -> np.ndarray:
    """``diag(exp(i k.gamma_a))`` for integer lattice vectors ``shifts[a]``."""
    gam = np.asarray(shifts, float) @ grid.lattice.basis  # (m, d)
    return np.stack([np.diag(np.exp(1j * (k @ gam.T))) for k in grid.points])


def round_half_to_zero(x):
    x = np.asarray(x, float)
    return np.sign(x) * np.ceil(np.abs(x) - 0.5)
