import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from pncollapse.core_model import discretize_primitive
from pncollapse.errors import InvalidInputError, RankDeficiencyError, UnsupportedKernelError
from pncollapse.noise_kernels import (GridNoise, KernelSpec, NonPSDKernelWarning, SmearedKernelMatrix,
                                      assemble_kernel_matrix, check_tradeoff, eval_kernel_A,
                                      gauge_operator, gauge_residual, project_gauge, sample_grid_noise,
                                      saturating_DJ)

SI = KernelSpec(sigma=0.1)
UNIT = KernelSpec(sigma=0.1, G=1.0, c=1.0, hbar=1.0)
vec3 = st.tuples(*[st.floats(-3, 3) for _ in range(3)])


def test_far_tt_is_newtonian():
    x, y = np.zeros(3), np.array([0.0, 5.0, 0.0])
    assert SI.c ** 2 * eval_kernel_A(SI, 0, 0, x, y) == pytest.approx(SI.G * SI.hbar / 5.0, rel=1e-14)


def test_coincident_tt_is_capped():
    x = np.array([1.0, 2.0, 3.0])
    assert SI.c ** 2 * eval_kernel_A(SI, 0, 0, x, x) == pytest.approx(SI.G * SI.hbar / 0.1, rel=1e-14)


@pytest.mark.parametrize("mu,nu", [(1, 1), (2, 3), (3, 3), (0, 2)])
def test_current_blocks_vanish_without_couplings(mu, nu):
    assert eval_kernel_A(SI, mu, nu, np.zeros(3), np.ones(3)) == 0.0


@given(st.integers(0, 3), st.integers(0, 3), vec3, vec3, st.sampled_from(["regularized-coulomb", "gaussian"]))
def test_kernel_symmetry(mu, nu, x, y, family):
    spec = KernelSpec(family, 0.3, 1.0, 0.7, 0.2, 1.0, 1.0, 1.0)
    assert eval_kernel_A(spec, mu, nu, x, y) == eval_kernel_A(spec, nu, mu, y, x)


def test_unknown_family():
    with pytest.raises(UnsupportedKernelError):
        KernelSpec("yukawa", 0.1)


def test_gaussian_profile_closed_form():
    spec = KernelSpec("gaussian", 0.2)
    r = np.array([0.0, 0.05, 0.3, 2.0])
    expect = np.where(r > 0, erf(r / 0.4) / np.where(r > 0, r, 1), 1 / (0.2 * np.sqrt(np.pi)))
    np.testing.assert_allclose(spec.profile(r), expect, rtol=1e-13)


def test_tabulated_profile_interpolates_and_clamps():
    spec = KernelSpec("tabulated", 0.1, table_r=(0.0, 1.0, 2.0), table_g=(4.0, 2.0, 1.0))
    np.testing.assert_allclose(spec.profile([0.5, 1.5, 10.0]), [3.0, 1.5, 1.0])


def test_single_point_matrix():
    m = assemble_kernel_matrix(SI, [[0.0, 0.0, 0.0]])
    expect = np.zeros((4, 4))
    expect[0, 0] = SI.G * SI.hbar / (SI.sigma * SI.c ** 2)
    np.testing.assert_allclose(m.matrix, expect, rtol=1e-14)


def test_two_point_tt_block_and_eigenvalues():
    r = 0.5
    m = assemble_kernel_matrix(UNIT, [[0, 0, 0], [r, 0, 0]])
    blk = m.block(0, 0)
    np.testing.assert_allclose(blk, [[10.0, 2.0], [2.0, 10.0]])
    # eigenvalues of [[a, b], [b, a]] are a +- b
    np.testing.assert_allclose(np.linalg.eigvalsh(blk), [8.0, 12.0])
    assert m.psd


def test_sphere_kernel_with_rotational_block_is_psd():
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, 64)
    # sigma below the smallest point separation (0.34 m)
    spec = KernelSpec("regularized-coulomb", 0.1, kappa_rot=1.0, G=1.0, c=1.0, hbar=1.0)
    m = assemble_kernel_matrix(spec, b.positions)
    assert m.min_eig >= -1e-10 * m.max_eig


def test_non_psd_mixing_is_flagged_not_fatal():
    spec = KernelSpec(sigma=0.1, kappa_rot=0.1, kappa_mix=1.0, G=1.0, c=1.0, hbar=1.0)
    with pytest.warns(NonPSDKernelWarning):
        m = assemble_kernel_matrix(spec, [[0, 0, 0], [1, 0, 0]])
    assert m.status == "warning"
    assert m.certificate()["psd"] is False


@given(st.floats(0.0, 3.0), st.floats(-2.0, 2.0))
def test_coupling_psd_criterion(k_rot, k_mix):
    spec = KernelSpec(sigma=0.1, kappa_rot=k_rot, kappa_mix=k_mix)
    lam = np.linalg.eigvalsh(spec.coupling)
    criterion = spec.kappa_tt * k_rot - 3 * k_mix ** 2
    if abs(criterion) > 1e-9:
        assert (lam[0] >= -1e-12) == (criterion > 0)


def test_gaussian_family_is_psd_on_random_sets(rng):
    spec = KernelSpec("gaussian", 0.1, G=1.0, c=1.0, hbar=1.0)
    for _ in range(20):
        m = assemble_kernel_matrix(spec, rng.uniform(0, 1, (40, 3)))
        assert m.psd


def test_capped_coulomb_is_indefinite_on_rock_salt_lattice():
    # Alternating unit weights on a cubic lattice of spacing sigma probe the
    # Madelung sum: w^T G w / N = 1/sigma - 1.7476/sigma < 0.
    k = np.arange(6)
    pts = 0.1 * np.stack(np.meshgrid(k, k, k, indexing="ij"), -1).reshape(-1, 3)
    g = UNIT.profile_matrix(pts)
    w = (-1.0) ** np.rint(pts.sum(axis=1) / 0.1)
    assert w @ g @ w < 0
    with pytest.warns(NonPSDKernelWarning):
        assert not assemble_kernel_matrix(UNIT, pts).psd


def test_csv_header_carries_units(tmp_path):
    m = assemble_kernel_matrix(SI, [[0, 0, 0], [1, 0, 0]])
    m.to_csv(tmp_path / "k.csv")
    head = (tmp_path / "k.csv").read_text().splitlines()[0]
    assert "m^2 s^-1" in head and "N=2" in head


def test_asymmetric_matrix_rejected():
    a = np.zeros((4, 4))
    a[0, 1] = 1.0
    with pytest.raises(InvalidInputError):
        SmearedKernelMatrix(a, 1)


# -- saturating D_J and trade-off ---------------------------------------------

def test_saturating_of_scaled_identity():
    a, hbar = 3.0, 2.0
    dj = saturating_DJ(SmearedKernelMatrix(a * np.eye(4), 1, hbar))
    np.testing.assert_allclose(dj.matrix, hbar ** 2 / (4 * a) * np.eye(4), rtol=1e-14)


def test_saturating_two_point_inverse():
    r = 0.5
    da = assemble_kernel_matrix(UNIT, [[0, 0, 0], [r, 0, 0]])
    dj = saturating_DJ(da)
    blk = da.block(0, 0)
    a, b = blk[0, 0], blk[0, 1]
    inv = np.array([[a, -b], [-b, a]]) / (a * a - b * b)
    np.testing.assert_allclose(dj.block(0, 0), 0.25 * inv, rtol=1e-12)


def test_saturating_of_zero_kernel():
    with pytest.raises(RankDeficiencyError):
        saturating_DJ(SmearedKernelMatrix(np.zeros((4, 4)), 1, 1.0))


def _full_rank_kernel():
    b = discretize_primitive("sphere", {"radius": 1.0, "mass": 1.0}, 12)
    spec = KernelSpec("gaussian", 0.3, kappa_rot=1.0, kappa_mix=0.2, G=1.0, c=1.0, hbar=1.0)
    return assemble_kernel_matrix(spec, b.positions)


def test_product_spectrum_is_saturated():
    da = _full_rank_kernel()
    dj = saturating_DJ(da)
    w, v = np.linalg.eigh(da.matrix)
    root = (v * np.sqrt(w)) @ v.T
    np.testing.assert_allclose(np.linalg.eigvalsh(root @ dj.matrix @ root), 0.25, rtol=1e-8)


@pytest.mark.parametrize("scale,passes,margin", [(1.0, True, 0.0), (0.5, False, -0.125), (2.0, True, 0.25)])
def test_tradeoff_scaling(scale, passes, margin):
    da = _full_rank_kernel()
    dj = saturating_DJ(da)
    res = check_tradeoff(da, SmearedKernelMatrix(scale * dj.matrix, dj.n_points, dj.hbar, "D_J"))
    assert res.passed is passes
    assert res.margin == pytest.approx(margin, abs=1e-8)


@given(st.floats(1.0, 50.0), st.floats(0.0, 1.0))
def test_tradeoff_monotone_in_scale(s, noise):
    da = _full_rank_kernel()
    dj = saturating_DJ(da).matrix
    rng = np.random.default_rng(0)
    a = rng.normal(size=dj.shape)
    base = dj + noise * (a @ a.T) * 1e-3
    r1 = check_tradeoff(da, SmearedKernelMatrix(base, da.n_points, 1.0, "D_J"))
    r2 = check_tradeoff(da, SmearedKernelMatrix(s * base, da.n_points, 1.0, "D_J"))
    assert not (r1.passed and not r2.passed)
    assert r2.margin >= r1.margin - 1e-12


def test_tradeoff_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        check_tradeoff(SmearedKernelMatrix(np.eye(4), 1), SmearedKernelMatrix(np.eye(8), 2))


# -- gauge residual -------------------------------------------------------------

SHAPE = (4, 5, 5, 5)


def test_static_divergence_free_noise_has_zero_residual():
    x = np.arange(5.0)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    a_vec = np.stack([Y, Z, X])  # each component independent of its own coordinate
    a_vec = np.broadcast_to(a_vec[:, None], (3,) + SHAPE)
    res = gauge_residual(GridNoise(np.ones(SHAPE), a_vec, 0.5, (1.0, 1.0, 1.0)))
    assert res.residual_norm == 0.0


def test_linear_in_time_scalar_noise():
    a, dt, h = 2.5, 0.5, (1.0, 0.5, 2.0)
    t = dt * np.arange(SHAPE[0])
    a_t = np.broadcast_to((a * t)[:, None, None, None], SHAPE)
    res = gauge_residual(GridNoise(a_t, np.zeros((3,) + SHAPE), dt, h))
    volume = np.prod(SHAPE) * dt * np.prod(h)
    assert res.residual_norm == pytest.approx(abs(a) * np.sqrt(volume), rel=1e-13)
    assert res.max_abs == pytest.approx(a)


def test_operator_matches_finite_differences():
    noise = sample_grid_noise(SHAPE, 0.3, (0.5, 0.7, 1.1), seed=1)
    d = gauge_operator(SHAPE, 0.3, (0.5, 0.7, 1.1))
    v = np.concatenate([noise.a_t.ravel(), noise.a_vec.ravel()])
    r = (d @ v).reshape(SHAPE)
    vol = 0.3 * 0.5 * 0.7 * 1.1
    assert np.sqrt(np.sum(r * r) * vol) == pytest.approx(gauge_residual(noise).residual_norm, rel=1e-12)


@pytest.mark.parametrize("shape", [(4, 4, 4, 4), (6, 8, 8, 8)])
def test_projection_removes_residual(shape):
    noise = sample_grid_noise(shape, 1.0, (1.0, 1.0, 1.0), seed=2)
    before = gauge_residual(noise).residual_norm
    after = gauge_residual(project_gauge(noise)).residual_norm
    assert after <= 1e-10 * before


def test_degenerate_grid_rejected():
    with pytest.raises(InvalidInputError):
        GridNoise(np.zeros((1, 3, 3, 3)), np.zeros((3, 1, 3, 3, 3)), 1.0, (1, 1, 1))
