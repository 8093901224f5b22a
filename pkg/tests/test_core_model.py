import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pncollapse.constants import M_SUN
from pncollapse.core_model import (PointMassBody, SpinConfig, discretize_primitive, inertia_tensor,
                                   is_symmetric_under, mass_current_samples, read_body_csv, rotate_body,
                                   rotation_matrix, total_angular_momentum, write_body_csv)
from pncollapse.errors import InvalidParameterError
from pncollapse.quantum_ops import shared_binning

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)
axes = st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 0.1)


def dumbbell():
    return discretize_primitive("dumbbell", {"separation": 2.0, "mass": 2.0}, 2)


# -- discretize_primitive -------------------------------------------------

def test_single_point_sphere_sits_at_origin():
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, 1)
    assert b.n_points == 1
    assert b.masses[0] == 1.0
    np.testing.assert_array_equal(b.positions, np.zeros((1, 3)))


def test_two_point_dumbbell():
    b = dumbbell()
    np.testing.assert_allclose(b.masses, [1.0, 1.0])
    np.testing.assert_allclose(sorted(b.positions[:, 0]), [-1.0, 1.0])
    np.testing.assert_allclose(b.masses @ b.positions, 0.0, atol=1e-15)


def test_sphere_inertia_matches_uniform_ball():
    b = discretize_primitive("sphere", {"radius": 0.5, "mass": 1.0}, 2048)
    tensor = inertia_tensor(b).tensor
    np.testing.assert_allclose(np.diag(tensor), 0.1, rtol=0.02)
    assert np.max(np.abs(tensor - np.diag(np.diag(tensor)))) < 0.02 * 0.1


def test_neutron_star_sized_sphere_inertia():
    M, R = 2 * M_SUN, 1e4
    b = discretize_primitive("sphere", {"radius": R, "mass": M}, 1000)
    assert inertia_tensor(b).scalar_I == pytest.approx(0.4 * M * R ** 2, rel=0.02)


def test_sphere_second_moment_matches_uniform_ball():
    b = discretize_primitive("sphere", {"radius": 2.0, "mass": 3.0}, 500, seed=7)
    r2 = np.sum(b.masses * np.sum(b.positions ** 2, axis=1))
    assert r2 == pytest.approx(0.6 * 3.0 * 4.0, rel=1e-5)


def test_placement_is_reproducible_and_seeded():
    p = {"radius": 1.0, "mass": 1.0}
    a = discretize_primitive("sphere", p, 200, seed=3)
    b = discretize_primitive("sphere", p, 200, seed=3)
    c = discretize_primitive("sphere", p, 200, seed=4)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert not np.allclose(a.positions, c.positions)


@pytest.mark.parametrize("shape,params,n", [
    ("sphere", {"radius": -1.0, "mass": 1.0}, 10),
    ("sphere", {"radius": 1.0, "mass": 0.0}, 10),
    ("sphere", {"radius": 1.0, "mass": 1.0}, 0),
    ("dumbbell", {"separation": 1.0, "mass": 1.0}, 3),
    ("triaxial-ellipsoid", {"semi_axes": (1.0, 2.0), "mass": 1.0}, 10),
    ("cube", {"radius": 1.0, "mass": 1.0}, 10),
])
def test_invalid_primitives(shape, params, n):
    with pytest.raises(InvalidParameterError):
        discretize_primitive(shape, params, n)


def test_point_body_rejects_nonpositive_mass():
    with pytest.raises(InvalidParameterError):
        PointMassBody([1.0, -1.0], [[0, 0, 0], [1, 0, 0]])


def test_body_is_recentred():
    b = PointMassBody([1.0, 3.0], [[0, 0, 0], [4, 0, 0]])
    np.testing.assert_allclose(b.masses @ b.positions, 0.0, atol=1e-14)
    np.testing.assert_allclose(b.positions[:, 0], [-3.0, 1.0])


def test_ellipsoid_inertia():
    a = np.array([1.0, 2.0, 3.0])
    b = discretize_primitive("triaxial-ellipsoid", {"semi_axes": a, "mass": 5.0}, 3000)
    expect = 5.0 / 5.0 * np.array([a[1] ** 2 + a[2] ** 2, a[0] ** 2 + a[2] ** 2, a[0] ** 2 + a[1] ** 2])
    np.testing.assert_allclose(np.diag(inertia_tensor(b).tensor), expect, rtol=0.03)


# -- inertia / rotation -----------------------------------------------------

def test_single_point_inertia_is_zero():
    b = PointMassBody([1.0], [[0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(inertia_tensor(b).tensor, np.zeros((3, 3)))


def test_dumbbell_inertia_about_z():
    assert inertia_tensor(dumbbell(), (0, 0, 1)).scalar_I == pytest.approx(2.0)


def test_rotation_by_zero_is_identity():
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, 50)
    np.testing.assert_allclose(rotate_body(b, SpinConfig((0, 1, 0), 0.0)).positions, b.positions, atol=1e-15)


def test_dumbbell_quarter_turn():
    r = rotate_body(dumbbell(), SpinConfig((0, 0, 1), np.pi / 2))
    np.testing.assert_allclose(sorted(r.positions[:, 1]), [-1.0, 1.0])
    np.testing.assert_allclose(r.positions[:, [0, 2]], 0.0, atol=1e-15)


def test_rotation_matrix_is_orthogonal_and_proper():
    m = rotation_matrix(0.7, (1, 2, 3))
    np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-15)
    assert np.linalg.det(m) == pytest.approx(1.0)


@given(angles, axes, st.integers(0, 10))
def test_rotation_preserves_mass_inertia_spectrum_and_distances(theta, axis, seed):
    b = discretize_primitive("triaxial-ellipsoid", {"semi_axes": (1.0, 1.5, 2.0), "mass": 2.0}, 30, seed)
    r = rotate_body(b, SpinConfig(axis, theta))
    assert r.total_mass == pytest.approx(b.total_mass, rel=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(inertia_tensor(r).tensor),
                               np.linalg.eigvalsh(inertia_tensor(b).tensor), rtol=1e-12)
    d0 = np.linalg.norm(b.positions[:, None] - b.positions[None], axis=-1)
    d1 = np.linalg.norm(r.positions[:, None] - r.positions[None], axis=-1)
    np.testing.assert_allclose(d1, d0, rtol=1e-12, atol=1e-12)


@given(angles, axes)
def test_sphere_histogram_is_rotation_invariant(theta, axis):
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, 400)
    cells = shared_binning([b, rotate_body(b, SpinConfig(axis, theta))], 0.25)
    np.testing.assert_allclose(cells.weights[0], cells.weights[1], rtol=1e-12, atol=1e-15)


# -- currents -----------------------------------------------------------------

def test_no_spin_no_current():
    _, j = mass_current_samples(dumbbell(), SpinConfig((0, 0, 1), 0.0, rate=0.0))
    np.testing.assert_array_equal(j, 0.0)


def test_point_current_is_omega_cross_x():
    b = PointMassBody([1.0, 1.0], [[1, 0, 0], [-1, 0, 0]])
    x, j = mass_current_samples(b, SpinConfig((0, 0, 1), 0.0, rate=1.0))
    np.testing.assert_allclose(j[np.argmax(x[:, 0])], [0.0, 1.0, 0.0])


@given(axes, st.floats(-5, 5), st.integers(0, 5))
def test_angular_momentum_matches_inertia_times_omega(axis, rate, seed):
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 2.0}, 300, seed)
    spin = SpinConfig(axis, 0.0, rate)
    L = total_angular_momentum(*mass_current_samples(b, spin))
    expect = inertia_tensor(b).tensor @ spin.omega
    np.testing.assert_allclose(L, expect, rtol=1e-10, atol=1e-12 * (1 + abs(rate)))
    assert L @ spin.axis == pytest.approx(inertia_tensor(b, axis).scalar_I * rate, rel=1e-10, abs=1e-12)


# -- symmetry -------------------------------------------------------------------

def test_dumbbell_half_turn_about_own_axis_is_symmetric():
    assert is_symmetric_under(dumbbell(), SpinConfig((1, 0, 0), np.pi))


def test_dumbbell_quarter_turn_about_z_is_not_symmetric():
    assert not is_symmetric_under(dumbbell(), SpinConfig((0, 0, 1), np.pi / 2))


def test_ring_step_rotation_is_symmetric():
    ring = discretize_primitive("ring", {"radius": 1.0, "mass": 12.0}, 12)
    assert is_symmetric_under(ring, SpinConfig((0, 0, 1), 2 * np.pi / 12))
    assert not is_symmetric_under(ring, SpinConfig((0, 0, 1), np.pi / 12))


@given(st.integers(1, 60), st.integers(0, 10))
def test_identity_rotation_is_always_a_symmetry(n, seed):
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, n, seed)
    assert is_symmetric_under(b, SpinConfig((0, 0, 1), 0.0))


def test_spin_config_rejects_zero_axis():
    with pytest.raises(InvalidParameterError):
        SpinConfig((0, 0, 0), 1.0)


def test_body_csv_roundtrip(tmp_path):
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, 20)
    write_body_csv(b, tmp_path / "b.csv")
    r = read_body_csv(tmp_path / "b.csv")
    np.testing.assert_array_equal(r.masses, b.masses)
    np.testing.assert_allclose(r.positions, b.positions, atol=1e-15)
