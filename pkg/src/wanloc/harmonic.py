"""Harmonic maps from the sphere into U(m): energies, quantization and stability.

Test maps come from holomorphic lines ``v(z)`` in C^m through the Cartan
embedding ``omega = omega0 (p - p_perp) = omega0 (2p - 1)``, where ``p`` is
the orthogonal projector onto ``span v(z)``.  Norms are Hilbert-Schmidt
throughout, ``<A, B> = Re tr(A^* B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HarmonicError, InvalidPolynomials, QuadratureDivergence, TangencyViolation

EIGHT_PI = 8 * np.pi


def _trim(c, tol):
    """Drop leading coefficients below ``tol`` relative to the largest one."""
    c = np.asarray(c, dtype=complex)
    scale = np.abs(c).max() if c.size else 0.0
    if scale == 0.0:
        return np.zeros(1, dtype=complex)
    nz = np.nonzero(np.abs(c) > tol * scale)[0]
    return c[: nz[-1] + 1]


def _sylvester(p, q) -> np.ndarray:
    """Sylvester matrix of two polynomials given low-order first."""
    p, q = np.asarray(p)[::-1], np.asarray(q)[::-1]  # high order first
    n, m = len(p) - 1, len(q) - 1
    s = np.zeros((n + m, n + m), dtype=complex)
    for i in range(m):
        s[i, i:i + n + 1] = p
    for i in range(n):
        s[m + i, i:i + m + 1] = q
    return s


def _relative_resultant(p, q) -> float:
    """``sigma_min / sigma_max`` of the Sylvester matrix; zero iff a common root."""
    if len(p) == 1 or len(q) == 1:
        return 1.0
    sv = np.linalg.svd(_sylvester(p, q), compute_uv=False)
    return float(sv[-1] / sv[0])


@dataclass(frozen=True)
class HolomorphicLine:
    """Polynomial curve ``z -> [v_1(z) : ... : v_m(z)]`` with no common root.

    ``polys[a]`` holds coefficients low order first.  Use :func:`make_line`
    to build one from raw data; it strips common factors.
    """

    polys: tuple
    degree: int

    @property
    def m(self) -> int:
        return len(self.polys)

    def _padded(self) -> np.ndarray:
        out = np.zeros((self.m, self.degree + 1), dtype=complex)
        for a, c in enumerate(self.polys):
            out[a, :len(c)] = c
        return out

    def vector(self, z) -> np.ndarray:
        """``v(z)`` with shape ``z.shape + (m,)``."""
        z = np.asarray(z, dtype=complex)
        coef = self._padded()
        powers = z[..., None] ** np.arange(self.degree + 1)
        return powers @ coef.T

    def vector_at_infinity_chart(self, w) -> np.ndarray:
        """``w^degree v(1/w)``, the same line in the chart around infinity."""
        w = np.asarray(w, dtype=complex)
        coef = self._padded()[:, ::-1]
        powers = w[..., None] ** np.arange(self.degree + 1)
        return powers @ coef.T

    def compose_mobius(self, a, b, c, d) -> "HolomorphicLine":
        """The line ``v((a z + b) / (c z + d))`` cleared of denominators."""
        if abs(a * d - b * c) < 1e-12:
            raise InvalidPolynomials("Mobius map must have a d - b c != 0")
        num = np.polynomial.polynomial
        deg = self.degree
        polys = []
        for coeffs in self._padded():
            acc = np.zeros(1, dtype=complex)
            for j, cj in enumerate(coeffs):
                term = num.polymul(num.polypow([b, a], j), num.polypow([d, c], deg - j))
                acc = num.polyadd(acc, cj * term)
            polys.append(acc)
        return make_line(polys)


def make_line(polys, tol: float = 1e-8) -> HolomorphicLine:
    """Validate polynomial data, divide out common roots and fix the degree.

    Raises
    ------
    InvalidPolynomials
        Fewer than two components, or every component vanishes.
    """
    if len(polys) < 2:
        raise InvalidPolynomials("a line in C^m needs m >= 2 components")
    cs = [_trim(c, tol) for c in polys]
    if all(np.all(c == 0) for c in cs):
        raise InvalidPolynomials("all polynomials vanish")
    nonzero = [i for i, c in enumerate(cs) if np.any(c != 0)]
    npoly = np.polynomial.polynomial
    while True:
        lead = min(nonzero, key=lambda i: len(cs[i]))
        if len(cs[lead]) == 1:
            break
        common = None
        for r in npoly.polyroots(cs[lead]):
            vals = [abs(npoly.polyval(r, cs[i])) / np.abs(cs[i]).max() for i in nonzero]
            if max(vals) < np.sqrt(tol):
                common = r
                break
        if common is None:
            break
        for i in nonzero:
            q, _ = npoly.polydiv(cs[i], [-common, 1.0])
            cs[i] = _trim(q, tol)
    # a generic combination of the others shares a root with cs[lead] iff all do
    others = [i for i in nonzero if i != lead]
    if others:
        rng = np.random.default_rng(12345)
        wts = rng.normal(size=len(others)) + 1j * rng.normal(size=len(others))
        combo = np.zeros(max(len(cs[i]) for i in others), dtype=complex)
        for wgt, i in zip(wts, others):
            combo[:len(cs[i])] += wgt * cs[i]
        combo = _trim(combo, tol)
        if _relative_resultant(cs[lead], combo) < tol:
            raise InvalidPolynomials("could not remove a common factor")
    degree = max(len(c) - 1 for c in cs)
    return HolomorphicLine(polys=tuple(np.asarray(c) for c in cs), degree=int(degree))


def _projector(v) -> np.ndarray:
    norm2 = np.sum(np.abs(v) ** 2, axis=-1)
    return v[..., :, None] * v[..., None, :].conj() / norm2[..., None, None]


@dataclass(frozen=True)
class SphereMap:
    """``omega(z) = omega0 (2 p(z) - 1)`` for a holomorphic line."""

    line: HolomorphicLine
    omega0: np.ndarray = field(default=None, repr=False)
    right: np.ndarray = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.line.m

    def _wrap(self, refl):
        if self.omega0 is not None:
            refl = self.omega0 @ refl
        if self.right is not None:
            refl = refl @ self.right
        return refl

    def reflection(self, v) -> np.ndarray:
        p = _projector(v)
        return 2 * p - np.eye(self.m)

    def __call__(self, z) -> np.ndarray:
        return self._wrap(self.reflection(self.line.vector(z)))

    def at_infinity_chart(self, w) -> np.ndarray:
        return self._wrap(self.reflection(self.line.vector_at_infinity_chart(w)))


def sphere_map(line: HolomorphicLine, omega0=None, right=None) -> SphereMap:
    return SphereMap(line, None if omega0 is None else np.asarray(omega0, dtype=complex),
                     None if right is None else np.asarray(right, dtype=complex))


def _density(fn, z, h: float) -> np.ndarray:
    """``(1/2)(|omega^* d_x omega|^2 + |omega^* d_y omega|^2)`` by central differences."""
    om = fn(z)
    dx = (fn(z + h) - fn(z - h)) / (2 * h)
    dy = (fn(z + 1j * h) - fn(z - 1j * h)) / (2 * h)
    ox = np.conj(np.swapaxes(om, -1, -2)) @ dx
    oy = np.conj(np.swapaxes(om, -1, -2)) @ dy
    return 0.5 * (np.sum(np.abs(ox) ** 2, axis=(-2, -1)) + np.sum(np.abs(oy) ** 2, axis=(-2, -1)))


def _disk_rule(order: int, r0: float, r1: float):
    x, w = np.polynomial.legendre.leggauss(order)
    r = 0.5 * (r1 - r0) * x + 0.5 * (r1 + r0)
    wr = 0.5 * (r1 - r0) * w * r
    nth = 2 * order
    th = 2 * np.pi * np.arange(nth) / nth
    z = r[:, None] * np.exp(1j * th)[None, :]
    wts = wr[:, None] * np.full(nth, 2 * np.pi / nth)[None, :]
    return z.ravel(), wts.ravel()


def _chart_integral(fn, order, r0, r1, h):
    z, w = _disk_rule(order, r0, r1)
    return float(np.sum(_density(fn, z, h) * w))


def sphere_energy(omega: SphereMap, quad_order: int = 48, h: float = 1e-6,
                  overlap_tol: float = 0.01, return_charts: bool = False):
    """Dirichlet energy ``(1/2) int |omega^{-1} d omega|^2`` over the sphere.

    The integrand is conformally invariant in two dimensions, so the sphere
    is covered by the unit disk in ``z`` and the unit disk in ``w = 1/z``,
    each integrated in flat coordinates with Gauss-Legendre nodes in the
    radius and the periodic trapezoid rule in the angle.

    Raises
    ------
    QuadratureDivergence
        If the two charts disagree by more than ``overlap_tol`` on the
        annulus ``1/2 <= |z| <= 2`` that both can reach.
    """
    if quad_order < 1:
        raise HarmonicError("quad_order must be positive")
    inner = _chart_integral(omega, quad_order, 0.0, 1.0, h)
    outer = _chart_integral(omega.at_infinity_chart, quad_order, 0.0, 1.0, h)
    ann_z = _chart_integral(omega, quad_order, 0.5, 2.0, h)
    ann_w = _chart_integral(omega.at_infinity_chart, quad_order, 0.5, 2.0, h)
    scale = max(abs(ann_z), abs(ann_w))
    if scale > 1e-12 and abs(ann_z - ann_w) > overlap_tol * scale:
        raise QuadratureDivergence(
            f"charts disagree on the overlap annulus: {ann_z:.6g} vs {ann_w:.6g}")
    total = inner + outer
    if return_charts:
        return total, {"inner": inner, "outer": outer, "annulusZ": ann_z, "annulusW": ann_w}
    return total


def quantization_check(cases, quad_order: int = 48, tol: float = 0.01) -> list:
    """Energy of each line's Cartan map against ``8 pi`` times its degree.

    ``cases`` holds ``(name, HolomorphicLine)`` pairs or bare lines.
    """
    report = []
    for i, case in enumerate(cases):
        name, line = case if isinstance(case, tuple) else (f"case{i}", case)
        energy = sphere_energy(sphere_map(line), quad_order)
        target = EIGHT_PI * line.degree
        if line.degree == 0:
            ok = abs(energy) <= tol * EIGHT_PI
        else:
            ok = abs(energy - target) <= tol * target
        report.append({"case": name, "degree": line.degree, "energy": energy,
                       "ratioTo8pi": energy / EIGHT_PI, "pass": bool(ok)})
    return report


def cartan_reflection_det(line: HolomorphicLine, z) -> np.ndarray:
    """``det(p - p_perp)`` at the sample points ``z``; equals ``(-1)^(m-1)``."""
    v = line.vector(np.asarray(z, dtype=complex))
    return np.linalg.det(2 * _projector(v) - np.eye(line.m))


def bracket(a, b):
    return a @ b - b @ a


def cartan_curvature(a, b) -> float:
    """``R(A, B, A, B) = (1/4) tr([[A, B], A]^* B)`` for a bi-invariant metric."""
    c = bracket(bracket(a, b), a)
    return 0.25 * float(np.trace(c.conj().T @ b).real)


def tangent_projection(u, phi) -> np.ndarray:
    """Orthogonal projection of ``phi`` onto ``T_U SU(m) = U su(m)``."""
    m = u.shape[0]
    x = u.conj().T @ phi - phi.conj().T @ u
    return 0.5 * u @ (x - np.trace(x) / m * np.eye(m))


def canonical_onb(m: int) -> list:
    """Real orthonormal basis ``{E_ab, i E_ab}`` of the m x m complex matrices."""
    out = []
    for a in range(m):
        for b in range(m):
            e = np.zeros((m, m), dtype=complex)
            e[a, b] = 1.0
            out.append(e)
            out.append(1j * e)
    return out


def second_variation_identity(u, dus, onb=None, tol: float = 1e-10):
    """Both sides of the ONB-averaged second-variation identity at a point.

    ``lhs = sum_j sum_phi |nabla_j phi_T|^2 - R(dU_j, phi_T, dU_j, phi_T)`` with
    ``phi_T = P_U(phi)``, ``psi = U^* phi_T``, ``nabla_j V = U (d_j psi + [U^* dU_j, psi]/2)``
    and ``d_j psi`` from the explicit dependence of ``psi`` on ``U``;
    ``rhs = -(1/m) sum_j |dU_j|^2``.

    The tangents ``dus`` are first projected onto ``T_U SU(m)``.

    Raises
    ------
    TangencyViolation
        If a projected tangent still fails ``U^* dU + (U^* dU)^* = 0`` or
        ``tr U^* dU = 0`` by more than ``tol`` (for instance when ``U`` is not
        unitary).
    """
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    onb = canonical_onb(m) if onb is None else onb
    ident = np.eye(m)
    lhs = 0.0
    rhs = 0.0
    for du in dus:
        du = tangent_projection(u, np.asarray(du, dtype=complex))
        x = u.conj().T @ du
        resid = max(np.abs(x + x.conj().T).max(), abs(np.trace(x)))
        if resid > tol:
            raise TangencyViolation(f"tangent projection residual {resid:.3g}")
        rhs -= np.sum(np.abs(du) ** 2) / m
        for phi in onb:
            phi_t = tangent_projection(u, phi)
            psi = u.conj().T @ phi_t
            dhat = 0.5 * (du.conj().T @ phi - phi.conj().T @ du)
            dpsi = dhat - np.trace(dhat) / m * ident
            cov = u @ (dpsi + 0.5 * bracket(x, psi))
            lhs += np.sum(np.abs(cov) ** 2) - cartan_curvature(x, psi)
    return float(lhs), float(rhs)


def random_special_unitary(m: int, rng) -> np.ndarray:
    z = (rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return q / np.linalg.det(q) ** (1.0 / m)


def ball_grid(n: int, half_width: float = 1.0) -> tuple:
    """Cell midpoints of an ``n^3`` grid on ``[-L, L]^3`` and the spacing."""
    h = 2 * half_width / n
    ax = -half_width + h * (np.arange(n) + 0.5)
    return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1), h


def homogeneous_extension(omega: SphereMap, points) -> np.ndarray:
    """``U(k) = omega(k/|k|)`` through stereographic projection from the north pole."""
    r = np.linalg.norm(points, axis=-1)
    n = points / r[..., None]
    north = n[..., 2] > 0
    out = np.empty(points.shape[:-1] + (omega.m, omega.m), dtype=complex)
    z = (n[..., 0] + 1j * n[..., 1]) / (1 - np.where(north, 0.0, n[..., 2]))
    w = (n[..., 0] - 1j * n[..., 1]) / (1 + np.where(north, n[..., 2], 0.0))
    out[~north] = omega(z[~north])
    out[north] = omega.at_infinity_chart(w[north])
    return out


def radial_bump(points, radius: float) -> np.ndarray:
    """Smooth bump ``exp(1 - 1/(1 - |k|^2/R^2))`` supported in the ball of radius R."""
    s = np.sum(points ** 2, axis=-1) / radius ** 2
    out = np.zeros(s.shape)
    inside = s < 1
    out[inside] = np.exp(1 - 1 / (1 - s[inside]))
    return out


def stability_sides(u, eta, h: float):
    """``int eta^2 |U^{-1} dU|^2`` and ``m(m^2-1) int |grad eta|^2`` on a 3-D grid.

    Midpoint quadrature with central differences (one-sided on the outer
    layer, where ``eta`` must vanish).  Only evaluates the two sides.
    """
    u = np.asarray(u, dtype=complex)
    eta = np.asarray(eta, float)
    if np.abs(np.concatenate([eta[[0, -1]].ravel(), eta[:, [0, -1]].ravel(),
                              eta[:, :, [0, -1]].ravel()])).max() > 0:
        raise HarmonicError("eta must vanish on the boundary layer of the grid")
    m = u.shape[-1]
    uh = np.conj(np.swapaxes(u, -1, -2))
    dens = np.zeros(eta.shape)
    for ax in range(3):
        du = np.gradient(u, h, axis=ax)
        dens += np.sum(np.abs(uh @ du) ** 2, axis=(-2, -1))
    grad2 = sum(g ** 2 for g in np.gradient(eta, h))
    vol = h ** 3
    lhs = float(np.sum(eta ** 2 * dens) * vol)
    rhs = float(m * (m * m - 1) * np.sum(grad2) * vol)
    return lhs, rhs


def stability_energy_bound(m: int) -> float:
    """``(pi/2) m (m^2 - 1)``; a minimizing tangent map has energy at most this."""
    return 0.5 * np.pi * m * (m * m - 1)
