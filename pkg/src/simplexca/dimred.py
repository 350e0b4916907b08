"""Affine dimensionality reduction onto the N-1 dimensional signal subspace.

The chart is estimated from sample moments: centre at the sample mean, axes
along the top N-1 eigenvectors of the sample covariance.  Under the model the
signal lives exactly in that affine subspace, so reducing and lifting is
lossless in the noiseless case and discards only noise energy otherwise.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError, ShapeError


@dataclass
class AffineChart:
    """Orthonormal basis Q (M x (N-1)), centre mu (M,), and a residual diagnostic.

    residual_energy is the mean squared distance of the (centred) data to the
    chart's subspace; under pure Gaussian noise it concentrates around
    (M - N + 1) * sigma^2.
    """

    Q: np.ndarray
    mu: np.ndarray
    residual_energy: float = 0.0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.Q.ndim != 2 or self.mu.ndim != 1 or self.Q.shape[0] != self.mu.size:
            raise ShapeError("chart needs Q of shape M x (N-1) and mu of shape M")
        if not (np.all(np.isfinite(self.Q)) and np.all(np.isfinite(self.mu))):
            raise DomainError("chart contains non-finite entries")

    @property
    def M(self) -> int:
        return self.Q.shape[0]

    @property
    def N(self) -> int:
        return self.Q.shape[1] + 1


def _fix_signs(Q):
    # Deterministic sign convention: the largest-magnitude entry of each
    # column is made positive; argmax resolves ties at the lowest index.
    for j in range(Q.shape[1]):
        k = int(np.argmax(np.abs(Q[:, j])))
        if Q[k, j] < 0.0:
            Q[:, j] = -Q[:, j]
    return Q


def reduce(Y, N, gram_threshold=2000):
    """Project data onto the affine chart of the top N-1 covariance directions.

    Returns (Z, chart) with Z of shape (N-1) x T.  For M beyond
    gram_threshold the eigenproblem is solved in its T x T Gram form instead
    of the M x M covariance form; both branches give the same subspace.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeError("Y must be an M x T matrix")
    M, T = Y.shape
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise DomainError(f"N must be an integer >= 2, got {N!r}")
    if M < N - 1:
        raise ShapeError(f"cannot extract {N - 1} directions from {M}-dimensional data")
    if T < N:
        raise InsufficientDataError(f"need at least N={N} observations, got {T}")
    if not np.all(np.isfinite(Y)):
        raise DomainError("Y contains non-finite entries")

    mu = Y.mean(axis=1)
    X = Y - mu[:, None]
    k = N - 1
    if M <= gram_threshold:
        C = (X @ X.T) / T
        w, V = np.linalg.eigh(C)
        idx = np.argsort(w)[::-1][:k]
        top_w = w[idx]
        Q = V[:, idx]
        total = float(np.trace(C))
    else:
        G = (X.T @ X) / T
        w, V = np.linalg.eigh(G)
        idx = np.argsort(w)[::-1][:k]
        top_w = w[idx]
        # lift Gram eigenvectors: u = X v / sqrt(T w)
        denom = np.sqrt(np.maximum(T * top_w, np.finfo(float).tiny))
        Q = (X @ V[:, idx]) / denom
        total = float(np.trace(G))  # trace(C) == trace(G)
    Q = _fix_signs(np.ascontiguousarray(Q))
    residual = max(total - float(np.sum(top_w)), 0.0)
    chart = AffineChart(Q=Q, mu=mu, residual_energy=residual)
    Z = Q.T @ X
    return Z, chart


def lift(B, chart: AffineChart):
    """Map reduced-space columns back to the ambient space: Q B + mu."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != chart.Q.shape[1]:
        raise ShapeError(
            f"expected {chart.Q.shape[1]} x K input for this chart, got {B.shape}"
        )
    return chart.Q @ B + chart.mu[:, None]


def save_chart(chart: AffineChart, path):
    """Persist a chart as JSON so a later invocation can lift estimates."""
    payload = {
        "mu": chart.mu.tolist(),
        "Q": chart.Q.tolist(),
        "residual_energy": chart.residual_energy,
    }
    with open(os.fspath(path), "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_chart(path) -> AffineChart:
    with open(os.fspath(path)) as fh:
        payload = json.load(fh)
    return AffineChart(
        Q=np.asarray(payload["Q"], dtype=float),
        mu=np.asarray(payload["mu"], dtype=float),
        residual_energy=float(payload.get("residual_energy", 0.0)),
    )
