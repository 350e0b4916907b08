"""Scalar special functions and small linear-algebra helpers.

The gamma-family functions are evaluated by shifting the argument upward
with the recurrence until it is >= 10 and then applying the asymptotic
(Bernoulli-number) series.  Seven series terms at x >= 10 leave a truncation
error of about 1e-16, well inside the accuracy targets, so no external
special-function library is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

_SHIFT_POINT = 10.0
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# B_{2k} / (2k (2k-1)) for the log-gamma series, k = 1..7
_LOG_GAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)

# B_{2k} / (2k) for the digamma series, k = 1..7
_DIGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# B_{2k} for the trigamma series, k = 1..7
_TRIGAMMA_COEF = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances shared by the linear-algebra helpers.

    rel_eps and abs_eps bound relative/absolute comparisons, pinv_cutoff is
    the relative singular-value cutoff used by pseudo_inverse and the rank
    tests.  All must be positive and pinv_cutoff must be < 1.
    """

    rel_eps: float = 1e-10
    abs_eps: float = 1e-12
    pinv_cutoff: float = 1e-12

    def __post_init__(self):
        for name in ("rel_eps", "abs_eps", "pinv_cutoff"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be finite and positive, got {v!r}")
        if self.pinv_cutoff >= 1.0:
            raise DomainError("pinv_cutoff must be < 1")


DEFAULT_TOL = Tolerances()


def _as_positive_array(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.size and not np.all(np.isfinite(arr) & (arr > 0.0)):
        raise DomainError(f"{name} requires finite positive arguments")
    return arr


def _shifted(x):
    # Apply the upward recurrence until every element reaches the series
    # region.  Adding one at a time needs at most ceil(_SHIFT_POINT) passes.
    x = x.copy()
    acc_log = np.zeros_like(x)
    acc_inv = np.zeros_like(x)
    acc_inv2 = np.zeros_like(x)
    for _ in range(int(_SHIFT_POINT) + 2):
        low = x < _SHIFT_POINT
        if not low.any():
            break
        xl = x[low]
        acc_log[low] -= np.log(xl)
        acc_inv[low] -= 1.0 / xl
        acc_inv2[low] += 1.0 / (xl * xl)
        x[low] = xl + 1.0
    return x, acc_log, acc_inv, acc_inv2


def _restore(value, scalar_input):
    return float(value) if scalar_input else value


def log_gamma(x):
    """Natural log of the gamma function for positive real x (scalar or array)."""
    scalar = np.ndim(x) == 0
    z, acc_log, _, _ = _shifted(_as_positive_array(x, "log_gamma"))
    r = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_LOG_GAMMA_COEF):
        series = (series + c) * r
    series = series * z  # net power 1/z^(2k-1)
    out = (z - 0.5) * np.log(z) - z + _HALF_LOG_TWO_PI + series + acc_log
    return _restore(out, scalar)


def digamma(x):
    """Digamma (psi) function for positive real x (scalar or array)."""
    scalar = np.ndim(x) == 0
    z, _, acc_inv, _ = _shifted(_as_positive_array(x, "digamma"))
    r = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_DIGAMMA_COEF):
        series = (series + c) * r
    out = np.log(z) - 0.5 / z - series + acc_inv
    return _restore(out, scalar)


def trigamma(x):
    """Trigamma (psi') function for positive real x (scalar or array)."""
    scalar = np.ndim(x) == 0
    z, _, _, acc_inv2 = _shifted(_as_positive_array(x, "trigamma"))
    r = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_TRIGAMMA_COEF):
        series = (series + c) * r
    series = series / z  # net power 1/z^(2k+1)
    out = 1.0 / z + 0.5 * r + series + acc_inv2
    return _restore(out, scalar)


def check_vertex_matrix(A, min_vertices=1):
    """Validate an M x N vertex matrix and return it as a float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError(f"vertex matrix must be 2-D, got shape {A.shape}")
    if A.shape[1] < min_vertices:
        raise ShapeError(f"need at least {min_vertices} vertices, got {A.shape[1]}")
    if not np.all(np.isfinite(A)):
        raise DomainError("vertex matrix contains non-finite entries")
    return A


def edge_matrix(A):
    """Differences of the first N-1 vertex columns against the last one.

    Column i of the result is a_i - a_N.  The simplex spanned by A is full
    dimensional exactly when this M x (N-1) matrix has full column rank.
    """
    A = check_vertex_matrix(A, min_vertices=2)
    return A[:, :-1] - A[:, -1:]


def _edge_singular_values(A):
    E = edge_matrix(A)
    M, Nm1 = E.shape
    if M < Nm1:
        raise ShapeError(
            f"ambient dimension {M} too small for {Nm1 + 1} affinely independent vertices"
        )
    return np.linalg.svd(E, compute_uv=False)


def is_affinely_independent(A, tol: Tolerances = DEFAULT_TOL):
    """True when the columns of A are affinely independent."""
    s = _edge_singular_values(A)
    if s.size == 0:
        return True
    return bool(s[-1] > tol.pinv_cutoff * max(s[0], 1.0))


def log_simplex_volume(A, tol: Tolerances = DEFAULT_TOL):
    """Log volume of the simplex spanned by the columns of A.

    Returns -inf for affinely dependent vertices.  The factorial is kept in
    log space so large N cannot overflow.
    """
    s = _edge_singular_values(A)
    N = A.shape[1]
    if s.size and s[-1] <= tol.pinv_cutoff * max(s[0], 1.0):
        return -np.inf
    return float(np.sum(np.log(s)) - log_gamma(N))


def simplex_volume(A, tol: Tolerances = DEFAULT_TOL):
    """Volume of the (N-1)-simplex spanned by the N columns of A.

    Equals sqrt(det(E^T E)) / (N-1)! with E the edge matrix; 0.0 when the
    vertices are affinely dependent.
    """
    lv = log_simplex_volume(A, tol)
    return 0.0 if lv == -np.inf else float(math.exp(lv))


def null_one_basis(n):
    """Orthonormal basis (n x (n-1)) of the subspace orthogonal to the ones vector.

    Built from the Householder reflector that exchanges 1/sqrt(n) * ones with
    the last standard basis vector, so the result is deterministic and exactly
    orthogonal to ones up to roundoff.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    v = np.full(n, 1.0 / math.sqrt(n))
    w = v.copy()
    w[-1] -= 1.0
    H = np.eye(n) - (2.0 / (w @ w)) * np.outer(w, w)
    return H[:, : n - 1]


def pseudo_inverse(X, tol: Tolerances = DEFAULT_TOL):
    """Moore-Penrose pseudo-inverse with a relative singular-value cutoff."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"pseudo_inverse expects a 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("pseudo_inverse input contains non-finite entries")
    if 0 in X.shape:
        return np.zeros((X.shape[1], X.shape[0]))
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((X.shape[1], X.shape[0]))
    keep = s > tol.pinv_cutoff * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def logsumexp(v, axis=None):
    """Stable log of a sum of exponentials along an axis."""
    v = np.asarray(v, dtype=float)
    hi = np.max(v, axis=axis, keepdims=True)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    out = np.log(np.sum(np.exp(v - hi), axis=axis)) + np.squeeze(hi, axis=axis)
    return float(out) if np.ndim(out) == 0 else out
