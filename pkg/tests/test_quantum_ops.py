import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import random_pure_state
from pncollapse.core_model import PointMassBody, SpinConfig, discretize_primitive
from pncollapse.errors import InvalidInputError, InvalidParameterError
from pncollapse.quantum_ops import (angular_momentum_ops, conjugated_L, current_dressing,
                                    current_operator_samples, dumbbell_rotor_model, moments_of_states,
                                    orientation_operators, rotated_L_closed_form, rotation_operator,
                                    shared_binning, spin_dim)

HB = 1.0
js = st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5])
angles = st.floats(-4 * np.pi, 4 * np.pi, allow_nan=False)
axes = st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 0.1)


def ops(j, hbar=HB):
    return np.array([o.data for o in angular_momentum_ops(j, hbar)])


def test_spin_half_lz():
    np.testing.assert_allclose(ops(0.5, 2.0)[2], np.diag([1.0, -1.0]))


def test_spin_one_spectrum():
    np.testing.assert_allclose(np.linalg.eigvalsh(ops(1)[2]), [-1, 0, 1], atol=1e-15)


@given(js)
def test_casimir(j):
    ls = ops(j)
    np.testing.assert_allclose(np.einsum("kij,kjl->il", ls, ls), j * (j + 1) * np.eye(spin_dim(j)), atol=1e-12)


@given(js)
def test_commutation_relations(j):
    lx, ly, lz = ops(j)
    np.testing.assert_allclose(lx @ ly - ly @ lx, 1j * HB * lz, atol=1e-12)
    np.testing.assert_allclose(ly @ lz - lz @ ly, 1j * HB * lx, atol=1e-12)


@pytest.mark.parametrize("j", [0, -1, 0.3, 1.25])
def test_invalid_j(j):
    with pytest.raises(InvalidParameterError):
        angular_momentum_ops(j)


@given(js, axes)
def test_rotation_identity_cases(j, axis):
    d = spin_dim(j)
    np.testing.assert_allclose(rotation_operator(0.0, axis, j, HB).data, np.eye(d), atol=1e-14)
    np.testing.assert_allclose(rotation_operator(4 * np.pi, axis, j, HB).data, np.eye(d), atol=1e-12)


def test_spinor_sign():
    np.testing.assert_allclose(rotation_operator(2 * np.pi, (0, 0, 1), 0.5, HB).data, -np.eye(2), atol=1e-14)


@given(js, angles, axes)
def test_rotation_operator_matches_expm(j, theta, axis):
    n = np.asarray(axis) / np.linalg.norm(axis)
    u = expm(-1j * theta * np.einsum("k,kij->ij", n, ops(j)) / HB)
    np.testing.assert_allclose(rotation_operator(theta, axis, j, HB).data, u, atol=1e-11)


def test_closed_form_identity_and_quarter_turn():
    np.testing.assert_allclose(rotated_L_closed_form(0.0), np.eye(3))
    m = rotated_L_closed_form(np.pi / 2)
    # rows give R^dag L_i R in terms of (Lx, Ly, Lz)
    np.testing.assert_allclose(m, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


@given(st.sampled_from([0.5, 1.0, 1.5, 2.0]), angles, axes)
def test_closed_form_matches_conjugation(j, theta, axis):
    ls = ops(j)
    u = expm(-1j * theta * np.einsum("k,kij->ij", np.asarray(axis) / np.linalg.norm(axis), ls) / HB)
    direct = np.einsum("ji,kjl,lm->kim", u.conj(), ls, u)
    closed = np.einsum("kp,pij->kij", rotated_L_closed_form(theta, axis), ls)
    np.testing.assert_allclose(closed, direct, atol=1e-10)
    np.testing.assert_allclose(conjugated_L(theta, axis, j, HB), direct, atol=1e-10)


@given(js, angles, axes, st.integers(0, 1000))
def test_conjugation_preserves_spectrum(j, theta, axis, seed):
    rng = np.random.default_rng(seed)
    d = spin_dim(j)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = a + a.conj().T
    u = rotation_operator(theta, axis, j, HB).data
    np.testing.assert_allclose(np.linalg.eigvalsh(u.conj().T @ h @ u), np.linalg.eigvalsh(h), atol=1e-10)


@given(js, st.integers(0, 10_000), st.permutations([0, 1, 2]))
def test_uncertainty_relation(j, seed, perm):
    rng = np.random.default_rng(seed)
    psi = random_pure_state(rng, spin_dim(j))
    a, b, c = ops(j)[list(perm)]
    mean = lambda o: np.real(np.vdot(psi, o @ psi))  # noqa: E731
    var = lambda o: mean(o @ o) - mean(o) ** 2  # noqa: E731
    assert np.sqrt(var(a) * var(b)) >= 0.5 * HB * abs(mean(c)) - 1e-12


# -- currents -----------------------------------------------------------------

def test_current_vanishes_at_origin():
    b = PointMassBody([1.0, 2.0, 1.0], [[-1, 0, 0], [0, 0, 0], [1, 0, 0]])
    samples = current_operator_samples(1, b, 1.0, hbar=HB)
    np.testing.assert_array_equal(samples.positions[1], 0.0)
    np.testing.assert_array_equal(samples.ops[1], 0.0)


def test_constrained_current_of_point_on_x():
    m, x, I = 2.0, 0.7, 3.0
    t = current_dressing([[x, 0, 0]], [m], I, constrained_axis=(0, 0, 1))[0]
    lz = ops(1)[2]
    j_ops = np.einsum("kp,pij->kij", t, ops(1))
    np.testing.assert_allclose(j_ops[1], m * x * lz / I, atol=1e-15)
    np.testing.assert_array_equal(j_ops[[0, 2]], 0.0)


@given(st.integers(0, 1000))
def test_unconstrained_current_hermitian_and_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    x, m, I = rng.normal(size=3), rng.uniform(0.1, 2), rng.uniform(0.1, 2)
    t = current_dressing([x], [m], I)[0]
    ls = ops(1)
    j_ops = np.einsum("kp,pij->kij", t, ls)
    for op in j_ops:
        np.testing.assert_allclose(op, op.conj().T, atol=1e-14)
    # independent epsilon contraction: J = m (L ^ x) / I with (L ^ x)_k = L_{k+1} x_{k+2} - L_{k+2} x_{k+1}
    for k in range(3):
        k1, k2 = (k + 1) % 3, (k + 2) % 3
        np.testing.assert_allclose(j_ops[k], m / I * (ls[k1] * x[k2] - ls[k2] * x[k1]), atol=1e-14)
    # antisymmetry in (k, p) of the dressing with the position factored out
    eps_part = t * I / m
    np.testing.assert_allclose(eps_part, -eps_part.T, atol=1e-15)


def test_invalid_inertia():
    with pytest.raises(InvalidParameterError):
        current_dressing([[1, 0, 0]], [1.0], 0.0)


def test_constrained_current_reproduces_lz():
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 2.0}, 80)
    from pncollapse.core_model import inertia_tensor

    I = inertia_tensor(b).scalar_I
    s = current_operator_samples(1, b, I, constrained_axis=(0, 0, 1), hbar=HB)
    total = np.einsum("sa,sbij->abij", s.positions, s.ops)
    lz_total = total[0, 1] - total[1, 0]  # (x ^ J)_z
    np.testing.assert_allclose(lz_total, ops(1)[2], atol=1e-10)


# -- orientation basis ----------------------------------------------------------

def test_single_orientation():
    b = discretize_primitive("dumbbell", {"separation": 2.0, "mass": 2.0}, 2)
    model = orientation_operators(b, [SpinConfig()], 0.05)
    assert model.mass_ops.shape[1:] == (1, 1)
    np.testing.assert_allclose(model.mass_ops[:, 0, 0].sum(), 2.0)


def test_symmetric_orientations_have_equal_cells():
    b = discretize_primitive("dumbbell", {"separation": 2.0, "mass": 2.0}, 2)
    model = orientation_operators(b, [SpinConfig((1, 0, 0), 0.0), SpinConfig((1, 0, 0), 1.1)], 0.05)
    np.testing.assert_allclose(model.cells.weights[0], model.cells.weights[1])
    np.testing.assert_allclose(model.mass_ops[:, 0, 0], model.mass_ops[:, 1, 1])


def test_quarter_turn_dumbbell_cells_differ_at_lobes():
    b = discretize_primitive("dumbbell", {"separation": 2.0, "mass": 2.0}, 2)
    model = orientation_operators(b, [SpinConfig(), SpinConfig((0, 0, 1), np.pi / 2)], 0.05)
    diff = model.cells.weights[0] - model.cells.weights[1]
    lobes = {tuple(np.round(c, 6)) for c in model.cells.centres[diff != 0]}
    assert lobes == {(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, -1.0, 0.0)}


def test_empty_orientation_list():
    b = discretize_primitive("dumbbell", {"separation": 2.0, "mass": 2.0}, 2)
    with pytest.raises(InvalidInputError):
        orientation_operators(b, [], 0.1)


@given(st.floats(0.05, 1.0), st.floats(0, 2 * np.pi))
def test_binning_conserves_mass(cell, theta):
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 3.0}, 50)
    from pncollapse.core_model import rotate_body

    cells = shared_binning([b, rotate_body(b, SpinConfig((1, 1, 0), theta))], cell)
    np.testing.assert_allclose(cells.weights.sum(axis=1), 3.0, rtol=1e-12)


def test_moments_of_polarised_state():
    ls = ops(1)
    vec = np.linalg.eigh(ls[0])[1][:, -1]
    m = moments_of_states([np.outer(vec, vec.conj())], 1, HB)
    np.testing.assert_allclose(m.first[0], [1.0, 0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(m.cov[0], m.cov[0].conj().T, atol=1e-14)


def test_rotor_model_basis_orthonormal():
    m = dumbbell_rotor_model(2.0, 2.0, 0.05, np.pi / 2, 1, HB)
    np.testing.assert_allclose(m.basis.conj().T @ m.basis, np.eye(2), atol=1e-14)
    assert m.positions.shape == (4, 3)
    np.testing.assert_allclose(m.mass_ops.sum(axis=0), 2.0 * (m.basis @ m.basis.conj().T), atol=1e-14)
