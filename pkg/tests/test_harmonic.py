import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wanloc import harmonic as hm
from wanloc.errors import HarmonicError, InvalidPolynomials, QuadratureDivergence, TangencyViolation

EIGHT_PI = 8 * np.pi


def energy(polys, **kw):
    return hm.sphere_energy(hm.sphere_map(hm.make_line(polys)), **kw)


def random_su(m, rng):
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    a = a - a.conj().T
    return a - np.trace(a) / m * np.eye(m)


def test_degree_one_energy():
    assert energy([[1], [0, 1]]) == pytest.approx(EIGHT_PI, rel=5e-3)


def test_degree_two_energy_in_u3():
    assert energy([[1], [0, 1], [0, 0, 1]]) == pytest.approx(2 * EIGHT_PI, rel=5e-3)


def test_constant_map_has_zero_energy():
    line = hm.make_line([[1], [2]])
    assert line.degree == 0
    assert hm.sphere_energy(hm.sphere_map(line)) == 0.0


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_quantization_ratios(degree):
    line = hm.make_line([[1], [0] * degree + [1]])
    rep = hm.quantization_check([("mono", line)])[0]
    assert rep["degree"] == degree
    assert rep["ratioTo8pi"] == pytest.approx(degree, rel=1e-2)
    assert rep["pass"]


def test_left_and_right_translation_invariance(rng):
    line = hm.make_line([[1, 0.5], [0.3, 1], [0, 0, 1]])
    base = hm.sphere_energy(hm.sphere_map(line))
    for _ in range(3):
        left, right = hm.random_special_unitary(3, rng), hm.random_special_unitary(3, rng)
        assert hm.sphere_energy(hm.sphere_map(line, left)) == pytest.approx(base, abs=1e-10 * base)
        moved = hm.sphere_energy(hm.sphere_map(line, left, right))
        assert moved == pytest.approx(base, abs=1e-10 * base)


def test_mobius_reparameterization():
    line = hm.make_line([[1], [0, 1]])
    moved = line.compose_mobius(2, 1, 1, 1)
    assert moved.degree == 1
    assert hm.sphere_energy(hm.sphere_map(moved)) == pytest.approx(
        hm.sphere_energy(hm.sphere_map(line)), rel=1e-6)


def test_degenerate_mobius_rejected():
    with pytest.raises(InvalidPolynomials):
        hm.make_line([[1], [0, 1]]).compose_mobius(1, 2, 2, 4)


def test_common_factor_is_removed():
    # (z - 1, z^2 - 1) = (z - 1) (1, z + 1)
    line = hm.make_line([[-1, 1], [-1, 0, 1]])
    assert line.degree == 1
    np.testing.assert_allclose(line.polys[0], [1.0], atol=1e-10)
    np.testing.assert_allclose(line.polys[1], [1.0, 1.0], atol=1e-10)
    assert hm.sphere_energy(hm.sphere_map(line)) == pytest.approx(EIGHT_PI, rel=5e-3)


@pytest.mark.parametrize("polys", [[[1, 2, 3]], [[0], [0, 0]]])
def test_invalid_polynomials(polys):
    with pytest.raises(InvalidPolynomials):
        hm.make_line(polys)


@pytest.mark.parametrize("polys,order", [([[1, 2], [0, 1, 0, 1], [0, 0, 1]], 2),
                                         ([[0.2, 1], [3, 0, 0, 1]], 4)])
def test_coarse_quadrature_diverges(polys, order):
    with pytest.raises(QuadratureDivergence):
        energy(polys, quad_order=order)


def test_chart_diagnostics():
    total, charts = energy([[1], [0, 1]], return_charts=True)
    assert total == pytest.approx(charts["inner"] + charts["outer"], rel=1e-14)
    # z -> 1/z swaps the two components, so the charts see the same map
    assert charts["inner"] == pytest.approx(charts["outer"], rel=1e-10)
    assert charts["annulusZ"] == pytest.approx(charts["annulusW"], rel=1e-6)


def test_bad_quadrature_order():
    with pytest.raises(HarmonicError):
        energy([[1], [0, 1]], quad_order=0)


@pytest.mark.parametrize("m,polys", [(2, [[1], [0, 1]]), (3, [[1, 1], [0, 1], [0, 0, 1]])])
def test_reflection_determinant(m, polys, rng):
    z = rng.normal(size=100) + 1j * rng.normal(size=100)
    det = hm.cartan_reflection_det(hm.make_line(polys), z)
    np.testing.assert_allclose(det, (-1) ** (m - 1), atol=1e-12)


def test_sphere_map_is_unitary_with_constant_det(rng):
    omega = hm.sphere_map(hm.make_line([[1], [0, 1], [0, 0, 1]]), hm.random_special_unitary(3, rng))
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    vals = omega(z)
    err = np.abs(np.conj(np.swapaxes(vals, -1, -2)) @ vals - np.eye(3)).max()
    assert err <= 1e-12
    det = np.linalg.det(vals)
    assert np.abs(det - det[0]).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 3))
def test_cartan_curvature_is_a_commutator_norm(seed, m):
    rng = np.random.default_rng(seed)
    a, b = random_su(m, rng), random_su(m, rng)
    r = hm.cartan_curvature(a, b)
    assert r >= 0
    assert r == pytest.approx(0.25 * np.sum(np.abs(hm.bracket(a, b)) ** 2), rel=1e-12)


def test_cartan_curvature_vanishes_on_commuting_pairs(rng):
    a = random_su(3, rng)
    assert abs(hm.cartan_curvature(a, a @ a - np.trace(a @ a) / 3 * np.eye(3))) <= 1e-12


@pytest.mark.parametrize("m,tol", [(2, 1e-10), (3, 1e-9)])
def test_second_variation_identity(m, tol):
    rng = np.random.default_rng(100 + m)
    for _ in range(100):
        u = hm.random_special_unitary(m, rng)
        dus = [rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)) for _ in range(3)]
        lhs, rhs = hm.second_variation_identity(u, dus)
        assert abs(lhs - rhs) <= tol * (1 + abs(rhs))


def test_second_variation_zero_tangent(rng):
    u = hm.random_special_unitary(2, rng)
    assert hm.second_variation_identity(u, [np.zeros((2, 2))]) == (0.0, 0.0)


def test_tangent_projection_lands_in_su(rng):
    u = hm.random_special_unitary(3, rng)
    phi = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    x = u.conj().T @ hm.tangent_projection(u, phi)
    np.testing.assert_allclose(x, -x.conj().T, atol=1e-13)
    assert abs(np.trace(x)) <= 1e-13


def test_non_unitary_point_violates_tangency(rng):
    # a scalar multiple of a unitary would still pass; break normality instead
    u = hm.random_special_unitary(2, rng) + 0.3 * rng.normal(size=(2, 2))
    with pytest.raises(TangencyViolation):
        hm.second_variation_identity(u, [rng.normal(size=(2, 2))])


def test_onb_is_orthonormal():
    onb = hm.canonical_onb(2)
    gram = np.array([[np.trace(a.conj().T @ b).real for b in onb] for a in onb])
    np.testing.assert_array_equal(gram, np.eye(8))


def test_stability_sides_constant_map():
    pts, h = hm.ball_grid(16)
    eta = hm.radial_bump(pts, 0.9)
    u = np.broadcast_to(np.eye(2, dtype=complex), pts.shape[:-1] + (2, 2))
    lhs, rhs = hm.stability_sides(u, eta, h)
    assert lhs == 0.0 and rhs > 0


def test_stability_sides_degree_one_report(capsys):
    """Both sides are finite; no inequality is asserted for this non-minimizer."""
    pts, h = hm.ball_grid(24)
    omega = hm.sphere_map(hm.make_line([[1], [0, 1]]))
    u = hm.homogeneous_extension(omega, pts)
    lhs, rhs = hm.stability_sides(u, hm.radial_bump(pts, 0.9), h)
    with capsys.disabled():
        print(f"\nstability sides for the degree-one map: lhs {lhs:.4f}, rhs {rhs:.4f}")
    assert np.isfinite(lhs) and np.isfinite(rhs) and lhs > 0 and rhs > 0


def test_homogeneous_extension_matches_map_on_both_hemispheres(rng):
    omega = hm.sphere_map(hm.make_line([[1], [0, 1]]))
    pts = rng.normal(size=(40, 3))
    n = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
    south = n[:, 2] < 0
    z = (n[south, 0] + 1j * n[south, 1]) / (1 - n[south, 2])
    vals = hm.homogeneous_extension(omega, 3.0 * pts)
    np.testing.assert_allclose(vals[south], omega(z), atol=1e-12)
    # the north chart is the same map read through w = 1/z
    zn = (n[~south, 0] + 1j * n[~south, 1]) / (1 - n[~south, 2])
    np.testing.assert_allclose(vals[~south], omega(zn), atol=1e-10)


def test_stability_requires_vanishing_boundary():
    pts, h = hm.ball_grid(8)
    u = np.broadcast_to(np.eye(2, dtype=complex), pts.shape[:-1] + (2, 2))
    with pytest.raises(HarmonicError):
        hm.stability_sides(u, np.ones(pts.shape[:-1]), h)


def test_energy_bound_is_below_degree_one_energy():
    bound = hm.stability_energy_bound(2)
    assert bound == pytest.approx(3 * np.pi, rel=1e-15)
    assert energy([[1], [0, 1]]) > bound
