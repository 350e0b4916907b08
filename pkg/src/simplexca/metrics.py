"""Estimation-quality metrics and model-fit diagnostics.

Vertex estimates are only identified up to column order, so both error
metrics search over permutations with the Hungarian assignment before
averaging.  moment_diagnostics compares sample moments against their
closed-form model values as z-scores.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, ShapeError
from .mathcore import check_vertex_matrix, null_one_basis


def _check_pair(A0, A_hat):
    A0 = check_vertex_matrix(A0)
    A_hat = check_vertex_matrix(A_hat)
    if A0.shape != A_hat.shape:
        raise ShapeError(f"shape mismatch: truth {A0.shape} vs estimate {A_hat.shape}")
    return A0, A_hat


def mse(A0, A_hat):
    """Permutation-minimal mean squared error between vertex matrices.

    Returns (value, perm) where perm[n] is the truth column matched to
    estimate column n and value = sum_n ||a0_perm[n] - ahat_n||^2 / (M N).
    """
    A0, A_hat = _check_pair(A0, A_hat)
    M, N = A0.shape
    diff = A0[:, :, None] - A_hat[:, None, :]
    cost = np.sum(diff * diff, axis=0)  # cost[i, j] = ||a0_i - ahat_j||^2
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(N, dtype=int)
    perm[cols] = rows
    value = float(cost[rows, cols].sum() / (M * N))
    return value, perm


def sad(A0, A_hat):
    """Permutation-minimal spectral angle distances, in degrees.

    Returns (mean_angle, angles, perm); angles[n] is the angle between
    estimate column n and its matched truth column, and the permutation
    minimises the mean angle.
    """
    A0, A_hat = _check_pair(A0, A_hat)
    n0 = np.linalg.norm(A0, axis=0)
    n1 = np.linalg.norm(A_hat, axis=0)
    if np.any(n0 <= 0.0) or np.any(n1 <= 0.0):
        raise DomainError("sad is undefined for zero columns")
    cosine = (A0.T @ A_hat) / np.outer(n0, n1)
    angles_deg = np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))
    rows, cols = linear_sum_assignment(angles_deg)
    N = A0.shape[1]
    perm = np.empty(N, dtype=int)
    perm[cols] = rows
    per_col = angles_deg[perm, np.arange(N)]
    return float(per_col.mean()), per_col, perm


def model_moments(A0, sigma):
    """Closed-form observation mean and covariance for the uniform source model."""
    A0 = check_vertex_matrix(A0, min_vertices=2)
    if not (np.isfinite(sigma) and sigma >= 0.0):
        raise DomainError("sigma must be finite and >= 0")
    M, N = A0.shape
    mean = A0.sum(axis=1) / N
    AU = A0 @ null_one_basis(N)
    cov = (AU @ AU.T) / ((N + 1.0) * N) + sigma * sigma * np.eye(M)
    return mean, cov


def moment_diagnostics(Y, A0, sigma):
    """z-scores of the sample mean and covariance against their model values.

    Standard errors come from the data itself (CLT with empirical fourth
    moments for the covariance entries), so the scores are calibrated without
    Gaussianity assumptions.  Returns a dict with 'z_mean' (M,), 'z_cov'
    (M, M), and the overall 'max_abs_z'.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeError("Y must be M x T")
    mean, cov = model_moments(A0, sigma)
    M, T = Y.shape
    if mean.size != M:
        raise ShapeError("A0 and Y row dimensions disagree")
    if T < 10:
        raise DomainError("too few observations for moment diagnostics")

    emp_mean = Y.mean(axis=1)
    X = Y - emp_mean[:, None]
    emp_cov = (X @ X.T) / T
    se_mean = np.sqrt(np.diag(cov) / T)
    z_mean = (emp_mean - mean) / se_mean

    X2 = X * X
    fourth = (X2 @ X2.T) / T  # E[x_i^2 x_j^2] estimate
    var_cov = np.maximum(fourth - emp_cov * emp_cov, np.finfo(float).tiny) / T
    z_cov = (emp_cov - cov) / np.sqrt(var_cov)
    return {
        "z_mean": z_mean,
        "z_cov": z_cov,
        "max_abs_z": float(max(np.abs(z_mean).max(), np.abs(z_cov).max())),
    }
