import math

import numpy as np
import pytest

from simplexca.errors import DomainError, ShapeError
from simplexca.metrics import model_moments, moment_diagnostics, mse, sad
from simplexca.model import snr_to_sigma, synthesize


def test_mse_zero_for_permuted_copy():
    rng = np.random.default_rng(0)
    A0 = rng.uniform(size=(5, 4))
    perm = np.array([2, 0, 3, 1])
    value, p = mse(A0, A0[:, perm])
    assert value == 0.0
    assert np.array_equal(p, perm)


def test_mse_hand_value():
    A0 = np.array([[0.0, 1.0], [0.0, 0.0]])
    A_hat = np.array([[0.0, 1.0], [0.3, 0.0]])
    value, _ = mse(A0, A_hat)
    assert value == pytest.approx(0.09 / (2 * 2))


def test_mse_uses_optimal_assignment_not_greedy():
    A0 = np.array([[0.0, 10.0]])
    A_hat = np.array([[9.0, 10.1]])
    value, p = mse(A0, A_hat)
    # optimal pairing: 0<->9 and 10<->10.1, not the greedy 10<->9 match
    assert value == pytest.approx((81.0 + 0.01) / 2.0)
    assert np.array_equal(p, [0, 1])


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        mse(np.zeros((2, 3)), np.zeros((2, 4)))


def test_sad_zero_for_scaled_permuted_copy():
    rng = np.random.default_rng(1)
    A0 = rng.uniform(0.1, 1.0, size=(6, 3))
    perm = np.array([1, 2, 0])
    A_hat = A0[:, perm] * np.array([0.5, 2.0, 7.0])  # per-column positive scaling
    mean_angle, angles, p = sad(A0, A_hat)
    assert mean_angle <= 1e-5
    assert np.all(angles <= 1e-5)
    assert np.array_equal(p, perm)


def test_sad_known_angle():
    theta = 25.0
    rad = math.radians(theta)
    A0 = np.array([[1.0, 0.0], [0.0, 1.0]])
    A_hat = np.array([[math.cos(rad), 0.0], [math.sin(rad), 1.0]])
    mean_angle, angles, _ = sad(A0, A_hat)
    assert angles[0] == pytest.approx(theta, abs=1e-10)
    assert angles[1] == pytest.approx(0.0, abs=1e-10)
    assert mean_angle == pytest.approx(theta / 2.0, abs=1e-10)


def test_sad_zero_column_rejected():
    with pytest.raises(DomainError):
        sad(np.array([[1.0, 0.0], [0.0, 0.0]]), np.eye(2))


def test_model_moments_match_sampling():
    rng = np.random.default_rng(2)
    A0 = rng.uniform(size=(4, 3))
    sigma = 0.1
    mean, cov = model_moments(A0, sigma)
    ds = synthesize(A0, 400000, sigma, seed=3)
    emp_mean = ds.Y.mean(axis=1)
    emp_cov = np.cov(ds.Y, bias=True)
    assert np.max(np.abs(emp_mean - mean)) <= 2e-3
    assert np.max(np.abs(emp_cov - cov)) <= 2e-3


def test_moment_diagnostics_calibrated_and_sensitive():
    rng = np.random.default_rng(4)
    A0 = rng.uniform(size=(6, 3))
    sigma = snr_to_sigma(A0, 12.0)
    ds = synthesize(A0, 30000, sigma, seed=5)
    diag = moment_diagnostics(ds.Y, A0, sigma)
    assert diag["max_abs_z"] <= 5.0
    # a stale sigma (double the true value) must be flagged loudly
    diag_bad = moment_diagnostics(ds.Y, A0, 2.0 * sigma)
    assert diag_bad["max_abs_z"] > 4.0


def test_moment_diagnostics_validation():
    A0 = np.eye(2, 3)
    with pytest.raises(DomainError):
        moment_diagnostics(np.zeros((2, 5)), A0, 0.1)
    with pytest.raises(ShapeError):
        moment_diagnostics(np.zeros((3, 50)), A0, 0.1)
