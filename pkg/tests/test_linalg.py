import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from penlangevin.linalg import (DriftMatrix, NoiseMatrix, condition_gaussian, gaussian_logpdf, kronecker_sum,
                                matrix_exponential, ou_covariance, psd_factor, sample_mvn)


def van_loan(a, gamma, h):
    """Q(h) from the block exponential of [[-A, G], [0, A^T]] h."""
    n = a.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = -a
    m[:n, n:] = gamma
    m[n:, n:] = a.T
    f = scipy.linalg.expm(m * h)
    return f[n:, n:].T @ f[:n, n:]


def _drift(c, omega, alpha, b11, b12, b22):
    return DriftMatrix.build(c, omega, alpha, [[b11, b12], [b12, b22]], index=0)


def _pd_drift(c, omega, alpha, b11, corr, b22):
    return _drift(c, omega, alpha, b11, corr * np.sqrt(b11 * b22), b22)


drifts = st.builds(
    _pd_drift, st.floats(0.2, 5), st.floats(-2, 2), st.floats(1, 100),
    st.floats(0.01, 1), st.floats(-0.9, 0.9), st.floats(0.01, 1))


def test_drift_layout():
    d = DriftMatrix.build(1.0, 0.1, 70.0, [[1 / 9, 1 / 40], [1 / 40, 1 / 4]], index=0)
    np.testing.assert_array_equal(d.matrix[0:2, 2:4], np.eye(2))
    np.testing.assert_allclose(d.matrix[2:4, 0:2], -140 * np.array([[1 / 9, 1 / 40], [1 / 40, 1 / 4]]))
    np.testing.assert_allclose(d.friction, [[1.0, -0.1], [0.1, 1.0]])
    with pytest.raises(ValueError):
        DriftMatrix.build(0.0, 0.1)


def test_kronecker_sum_acts_as_lyapunov_operator():
    rng = np.random.default_rng(0)
    a, x = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    lhs = kronecker_sum(a) @ x.reshape(-1, order="F")
    np.testing.assert_allclose(lhs, (a @ x + x @ a.T).reshape(-1, order="F"), atol=1e-12)


def test_matrix_exponential():
    np.testing.assert_allclose(matrix_exponential(np.diag([0.0, np.log(2)])), np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[np.nan]]))


@given(drifts, st.floats(0.1, 10), st.sampled_from([1 / 3600, 1 / 60, 0.25, 1.0]))
def test_ou_covariance_matches_van_loan(drift, sigma, h):
    noise = NoiseMatrix(sigma)
    q, info = ou_covariance(drift, noise, h, full_output=True)
    ref = van_loan(drift.matrix, noise.matrix, h)
    assert info["method"] == "kronecker"
    np.testing.assert_allclose(q, ref, rtol=1e-7, atol=1e-9 * np.abs(ref).max())
    np.testing.assert_array_equal(q, q.T)


def test_small_step_position_block_is_accurate_entrywise():
    # at h = 1 s the position block is ~1e-10 while the velocity block is ~1e-2
    drift = _drift(1.0, 0.0, 70, 1 / 9, 1 / 40, 1 / 4)
    q = ou_covariance(drift, NoiseMatrix(5.64), 1 / 3600)
    ref = van_loan(drift.matrix, NoiseMatrix(5.64).matrix, 1 / 3600)
    np.testing.assert_allclose(q[:2, :2], ref[:2, :2], rtol=1e-7)


def test_flat_potential_uses_quadrature_and_closed_form():
    c, sigma, h = 1.0, 5.642, 1 / 60
    q, info = ou_covariance(DriftMatrix.build(c, 0.0), NoiseMatrix(sigma), h, full_output=True)
    assert info["method"] == "quadrature"
    # scalar integrated OU: Var V = s2 (1 - e^{-2ch}) / 2c, Cov(X, V) = s2 (1 - e^{-ch})^2 / 2c^2
    s2 = sigma**2
    np.testing.assert_allclose(q[2, 2], s2 * (1 - np.exp(-2 * c * h)) / (2 * c), rtol=1e-9)
    np.testing.assert_allclose(q[0, 2], s2 * (1 - np.exp(-c * h)) ** 2 / (2 * c**2), rtol=1e-8)
    var_x = s2 / c**2 * (h - 2 * (1 - np.exp(-c * h)) / c + (1 - np.exp(-2 * c * h)) / (2 * c))
    np.testing.assert_allclose(q[0, 0], var_x, rtol=1e-7)
    np.testing.assert_allclose(q, van_loan(DriftMatrix.build(c, 0.0).matrix, NoiseMatrix(sigma).matrix, h),
                               rtol=1e-8, atol=1e-15)


def test_zero_noise_gives_zero_covariance():
    d = _drift(1.0, 0.1, 70, 1 / 9, 1 / 40, 1 / 4)
    np.testing.assert_array_equal(ou_covariance(d, NoiseMatrix(0.0), 0.01), 0.0)


def test_ou_covariance_rejects_bad_step():
    with pytest.raises(ValueError):
        ou_covariance(DriftMatrix.build(1.0, 0.0), NoiseMatrix(1.0), 0.0)


def test_condition_gaussian_matches_textbook_formula():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(4, 4))
    cov = a @ a.T + 0.1 * np.eye(4)
    mean = rng.normal(size=4)
    x = rng.normal(size=2)
    m, s = condition_gaussian(mean, cov, x)
    # precision-form oracle: v | x ~ N(mu_v - P_vv^-1 P_vx (x - mu_x), P_vv^-1)
    p = np.linalg.inv(cov)
    pvv_inv = np.linalg.inv(p[2:, 2:])
    np.testing.assert_allclose(s, pvv_inv, rtol=1e-10)
    np.testing.assert_allclose(m, mean[2:] - pvv_inv @ p[2:, :2] @ (x - mean[:2]), rtol=1e-10)
    mb, sb = condition_gaussian(np.stack([mean, mean]), cov, np.stack([x, x]))
    np.testing.assert_allclose(mb[1], m)


def test_psd_factor_handles_singular_and_rejects_indefinite():
    v = np.array([[1.0, 2.0, 0, 0]]).T
    cov = v @ v.T
    f = psd_factor(cov)
    np.testing.assert_allclose(f @ f.T, cov, atol=1e-12)
    with pytest.raises(ValueError):
        psd_factor(np.diag([1.0, -0.5]))


def test_sample_mvn_moments():
    rng = np.random.default_rng(2)
    cov = np.array([[2.0, 0.6], [0.6, 0.5]])
    s = sample_mvn(np.array([1.0, -1.0]), cov, rng, size=200_000)
    np.testing.assert_allclose(s.mean(0), [1, -1], atol=0.01)
    np.testing.assert_allclose(np.cov(s.T), cov, atol=0.02)


def test_gaussian_logpdf_matches_scipy():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3))
    cov = a @ a.T + np.eye(3)
    mean = rng.normal(size=3)
    x = rng.normal(size=(5, 3))
    got = gaussian_logpdf(x, mean, np.linalg.inv(cov), np.linalg.slogdet(cov)[1])
    np.testing.assert_allclose(got, multivariate_normal(mean, cov).logpdf(x), rtol=1e-12)
