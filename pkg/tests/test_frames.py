import numpy as np
import pytest

from conftest import mathieu_problem
from wanloc.errors import DegenerateProjection, NonOrthonormalInput, TransportGap
from wanloc.fiber import BandWindow, assemble_fiber, make_basis, preset, solve_fiber
from wanloc.frames import (BlochFrame, WindowProjector, berry_connection, eigenvector_trial,
                           frame_smoothness, kato_nagy_transport, lowdin, projection_frame,
                           random_trial, riesz_projector, window_projector, window_projectors)
from wanloc.lattice import make_kgrid
from wanloc.stencil import make_stencil
from wanloc.wannier import attach_lattice_moments, moments, synthesize


def test_rank_one_projector():
    lat, pot = preset("mathieu1d", 0.5)
    spec = solve_fiber([0.2], make_basis(lat, 6.0), pot)
    v = window_projector(spec, BandWindow(0, 1))
    p = v @ v.conj().T
    assert np.trace(p).real == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(p, np.outer(spec.eigenvectors[:, 0], spec.eigenvectors[:, 0].conj()),
                               atol=1e-14)


def test_two_band_projector_is_idempotent(rng):
    lat, pot = preset("mathieu1d", 0.5)
    basis = make_basis(lat, 8.0)
    for k in rng.uniform(-0.5, 0.5, size=10):
        v = window_projector(solve_fiber([k], basis, pot), BandWindow(0, 2))
        p = v @ v.conj().T
        np.testing.assert_allclose(p @ p, p, atol=1e-10)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-12)
        assert np.trace(p).real == pytest.approx(2.0, abs=1e-8)


def test_riesz_contour_matches_eigenprojector():
    lat, pot = preset("mathieu1d", 0.5)
    op_basis = make_basis(lat, 8.0)
    spec = solve_fiber([0.3], op_basis, pot)
    h = assemble_fiber([0.3], op_basis, pot)
    e = spec.eigenvalues
    center = 0.5 * (e[0] + e[1])
    radius = 0.5 * (e[2] + e[1]) - center  # encloses bands 0 and 1 only
    p_riesz = riesz_projector(h, center, radius)
    v = window_projector(spec, BandWindow(0, 2))
    np.testing.assert_allclose(p_riesz, v @ v.conj().T, atol=1e-6)


def test_frame_at_gamma_reproduces_trial(mathieu32):
    gi = mathieu32.grid.gamma_index()
    trial = eigenvector_trial(mathieu32.spectra[gi], mathieu32.window)
    np.testing.assert_allclose(mathieu32.frame.coeffs[gi], trial, atol=1e-12)


def test_sigma_min_and_orthonormality(mathieu32):
    assert mathieu32.sigma_min.min() > 0.5
    assert mathieu32.frame.orthonormality_error() <= 1e-12
    projs = mathieu32.projectors
    for idx in range(mathieu32.grid.npoints):
        chi = mathieu32.frame.coeffs[idx]
        np.testing.assert_allclose(projs.apply(idx, chi), chi, atol=1e-8)


def test_orthogonal_trial_degenerates():
    prob = mathieu_problem(16)
    gi = prob.grid.gamma_index()
    wrong = prob.spectra[gi].eigenvectors[:, 1:2]
    with pytest.raises(DegenerateProjection):
        projection_frame(prob.projectors, wrong, prob.stencil, windowed=False)


def test_constant_trial_rotation_rotates_frame(mathieu_m2, rng):
    trial = random_trial(mathieu_m2.basis.size, 2, seed=4, nmodes=9)
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    u0 = lowdin(z)[0]
    f1, _ = projection_frame(mathieu_m2.projectors, trial, mathieu_m2.stencil, windowed=False)
    f2, _ = projection_frame(mathieu_m2.projectors, trial @ u0, mathieu_m2.stencil, windowed=False)
    np.testing.assert_allclose(f2.coeffs, f1.coeffs @ u0, atol=1e-10)
    a1, a2 = berry_connection(f1).values, berry_connection(f2).values
    np.testing.assert_allclose(a2, u0.conj().T @ a1 @ u0, atol=1e-10)


def test_windowed_trial_is_smoother(mathieu32):
    trial = random_trial(mathieu32.basis.size, 1, seed=7, nmodes=9)
    plain, _ = projection_frame(mathieu32.projectors, trial, mathieu32.stencil, windowed=False)
    smooth, _ = projection_frame(mathieu32.projectors, trial, mathieu32.stencil, windowed=True)
    c_plain, c_smooth = frame_smoothness(plain), frame_smoothness(smooth)
    assert np.isfinite(c_smooth) and c_smooth < c_plain


def test_connection_is_skew_hermitian(mathieu_m2):
    a = berry_connection(mathieu_m2.frame).values
    np.testing.assert_allclose(a, -np.conj(np.swapaxes(a, -1, -2)), atol=1e-15)


def test_constant_frame_has_zero_connection_in_interior():
    lat, _ = preset("mathieu1d", 0.0)
    grid = make_kgrid(lat, 12)
    basis = make_basis(lat, 3.0)
    coeffs = np.zeros((grid.npoints, basis.size, 1), dtype=complex)
    coeffs[:, basis.lookup([0]), 0] = 1.0
    a = berry_connection(BlochFrame(make_stencil(grid, basis), coeffs)).values
    np.testing.assert_array_equal(a[0, 1:-1], 0.0)


def test_hermitian_defect_is_second_order():
    d32 = berry_connection(mathieu_problem(32).frame).hermitian_defect[0]
    d64 = berry_connection(mathieu_problem(64).frame).hermitian_defect[0]
    assert 3.5 <= d32 / d64 <= 4.5


def test_mean_connection_gives_center():
    """i <A> is the center from the central-difference symbol, and tends to the true moment."""
    means = {}
    for n in (32, 64):
        prob = mathieu_problem(n)
        mean_a = berry_connection(prob.frame).values[0, :, 0, 0].mean()
        assert abs(mean_a.real) <= 1e-14
        ws = attach_lattice_moments(moments(synthesize(prob.frame)), prob.stencil)
        assert (1j * mean_a).real == pytest.approx(ws.lattice_centers[0, 0], abs=1e-12)
        means[n] = ((1j * mean_a).real, ws.centers[0, 0])
    extrapolated = (4 * means[64][0] - means[32][0]) / 3
    assert extrapolated == pytest.approx(means[64][1], abs=1e-4)


def test_transport_with_constant_projector_is_trivial():
    prob = mathieu_problem(16)
    v = prob.projectors.vectors[3]
    frozen = WindowProjector(np.repeat(v[None], prob.grid.npoints, axis=0))
    res = kato_nagy_transport(frozen, range(0, 8), prob.grid, prob.basis)
    for chi in res.frames:
        np.testing.assert_allclose(chi, v, atol=1e-14)


def test_transport_loop_holonomy(mathieu32):
    n = mathieu32.grid.npoints
    path = list(range(n // 2, n)) + list(range(0, n // 2 + 1))
    res = kato_nagy_transport(mathieu32.projectors, path, mathieu32.grid, mathieu32.basis)
    for idx, chi, wrap in zip(res.path, res.frames, res.wraps):
        # past the zone edge the window is the tau-image of the stored one
        v = mathieu32.basis.apply_tau_inverse(mathieu32.projectors.vectors[idx], wrap)
        np.testing.assert_allclose(v @ (v.conj().T @ chi), chi, atol=1e-8)
        np.testing.assert_allclose(chi.conj().T @ chi, np.eye(1), atol=1e-10)
    hol = res.holonomy(mathieu32.basis)
    np.testing.assert_allclose(hol.conj().T @ hol, np.eye(1), atol=1e-8)


def test_transport_rejects_orthogonal_jump():
    prob = mathieu_problem(8)
    vecs = prob.projectors.vectors.copy()
    vecs[1] = prob.spectra[0].eigenvectors[:, 1:2]  # orthogonal to the window at k_0
    with pytest.raises(TransportGap):
        kato_nagy_transport(WindowProjector(vecs), [0, 1], prob.grid, prob.basis)


def test_non_orthonormal_frame_detected(mathieu32):
    bad = BlochFrame(mathieu32.stencil, 1.01 * mathieu32.frame.coeffs)
    with pytest.raises(NonOrthonormalInput):
        bad.check_orthonormal()


def test_window_projectors_shape(mathieu_m2):
    projs = window_projectors(mathieu_m2.spectra, mathieu_m2.window)
    assert projs.rank == 2
    assert projs.vectors.shape == (mathieu_m2.grid.npoints, mathieu_m2.basis.size, 2)
