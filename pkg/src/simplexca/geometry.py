"""Convex-geometry companions of the likelihood: projections and objectives.

project_to_simplex solves the constrained least-squares problem
min_{s in simplex} ||y - A s||^2 exactly with a primal active-set method.
The objective evaluators cover the noiseless volume-minimisation problem,
its edge-smoothed data-fit relaxation (including the version valid above
the minimal ambient dimension), the hinge-penalty polyhedral form, and a
chance-constrained form built on a Gaussian tail bound of the likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import DomainError, ModelError, ShapeError
from .mathcore import (
    check_vertex_matrix,
    edge_matrix,
    is_affinely_independent,
    log_simplex_volume,
    pseudo_inverse,
    simplex_volume,
)

_ENUM_LIMIT = 10  # faces are enumerated exhaustively up to this many vertices


def _solve_face(G, b_cols, face):
    """Stationary point of the face-restricted problem for every column of b_cols.

    Solves the equality-constrained KKT system on the coordinates in `face`;
    returns (s_face, nu) with shapes (|face|, T) and (T,).
    """
    k = len(face)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = G[np.ix_(face, face)]
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.vstack([b_cols[face], np.ones((1, b_cols.shape[1]))])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k], sol[k]


def project_to_simplex(y, A, max_iter=None):
    """Euclidean projection of y onto the simplex spanned by the columns of A.

    Returns (s_star, dist_sq): the optimal barycentric weights (length N,
    nonnegative, summing to one) and the squared distance.  Exact up to
    linear-solve roundoff; the KKT residual is at the 1e-10 level.
    """
    A = check_vertex_matrix(A, min_vertices=1)
    y = np.asarray(y, dtype=float)
    if y.shape != (A.shape[0],):
        raise ShapeError(f"y must have shape ({A.shape[0]},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DomainError("y contains non-finite entries")
    N = A.shape[1]
    if N == 1:
        r = y - A[:, 0]
        return np.ones(1), float(r @ r)

    G = A.T @ A
    b = A.T @ y
    s = np.full(N, 1.0 / N)
    free = np.ones(N, dtype=bool)
    limit = max_iter if max_iter is not None else 50 * N + 50
    for _ in range(limit):
        F = np.flatnonzero(free)
        s_face, nu = _solve_face(G, b[:, None], list(F))
        cand = np.zeros(N)
        cand[F] = s_face[:, 0]
        if cand[F].min() >= -1e-12:
            s = np.where(free, cand, 0.0)
            fixed = np.flatnonzero(~free)
            if fixed.size == 0:
                break
            grad = G @ s - b
            kappa = grad[fixed] + float(nu[0])
            j = int(np.argmin(kappa))
            if kappa[j] >= -1e-10 * (1.0 + np.abs(grad).max()):
                break
            free[fixed[j]] = True
        else:
            d = cand - s
            blocking = F[(d[F] < 0.0) & (cand[F] < -1e-12)]
            ratios = s[blocking] / -d[blocking]
            theta = min(1.0, float(ratios.min()))
            s = np.maximum(s + theta * d, 0.0)
            block = blocking[int(np.argmin(ratios))]
            s[block] = 0.0
            free[block] = False
    s = np.maximum(s, 0.0)
    s = s / s.sum()
    r = y - A @ s
    return s, float(r @ r)


def project_to_simplex_batch(Y, A):
    """Projection of every column of Y; returns (S, dist_sq) of shapes (N,T), (T,).

    For N up to 10 all simplex faces are enumerated and solved in closed form
    (vectorised over points, exact); beyond that the per-point active-set
    routine is applied column by column.
    """
    A = check_vertex_matrix(A, min_vertices=1)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != A.shape[0]:
        raise ShapeError("Y must be M x T with M matching A")
    M, N = A.shape
    T = Y.shape[1]
    if N == 1:
        R = Y - A
        return np.ones((1, T)), np.sum(R * R, axis=0)
    if N > _ENUM_LIMIT:
        S = np.empty((N, T))
        d2 = np.empty(T)
        for t in range(T):
            S[:, t], d2[t] = project_to_simplex(Y[:, t], A)
        return S, d2

    G = A.T @ A
    Bc = A.T @ Y
    best_val = np.full(T, np.inf)
    best_s = np.zeros((N, T))
    for mask in range(1, 1 << N):
        face = [i for i in range(N) if mask >> i & 1]
        s_face, _ = _solve_face(G, Bc, face)
        feas = np.all(s_face >= -1e-10, axis=0)
        if not feas.any():
            continue
        Gf = G[np.ix_(face, face)]
        val = 0.5 * np.sum(s_face * (Gf @ s_face), axis=0) - np.sum(
            Bc[face] * s_face, axis=0
        )
        better = feas & (val < best_val)
        if better.any():
            best_val[better] = val[better]
            cols = np.zeros((N, int(better.sum())))
            cols[face] = np.maximum(s_face[:, better], 0.0)
            best_s[:, better] = cols
    best_s = best_s / best_s.sum(axis=0, keepdims=True)
    # Recompute distances from the residual itself: the form ||y||^2 + 2 val
    # cancels catastrophically near zero distance.
    R = Y - A @ best_s
    return best_s, np.sum(R * R, axis=0)


# ---------------------------------------------------------------------------
# objectives


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0.0):
        raise DomainError(f"lambda must be finite and positive, got {lam!r}")


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise DomainError(f"sigma must be finite and positive, got {sigma!r}")


def _check_data(Y, A):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] != A.shape[0] or Y.shape[1] < 1:
        raise ShapeError("Y must be M x T with M matching A")
    if not np.all(np.isfinite(Y)):
        raise DomainError("Y contains non-finite entries")
    return Y


def noiseless_svmin_objective(A, Y, dist_tol=1e-8, interior_tol=1e-10):
    """Volume criterion of the zero-noise likelihood.

    Returns log svol(A) when every column of Y lies strictly inside the open
    simplex spanned by A (full-dimensional case, M = N-1), and the
    infeasibility marker +inf otherwise.  Membership is decided through
    project_to_simplex: distance at most dist_tol and all barycentric
    coordinates above interior_tol.
    """
    A = check_vertex_matrix(A, min_vertices=2)
    M, N = A.shape
    if M != N - 1:
        raise ShapeError("noiseless objective is defined in the reduced space (M = N-1)")
    Y = _check_data(Y, A)
    S, d2 = project_to_simplex_batch(Y, A)
    inside = (d2 <= dist_tol * dist_tol) & (S.min(axis=0) >= interior_tol)
    if not bool(inside.all()):
        return float("inf")
    return log_simplex_volume(A)


def edge_smooth_objective(A, Y, lam, S=None):
    """Volume term plus a quadratic data-fit penalty.

    With S omitted, each point uses its simplex projection, which is the
    minimising choice of the fit term.  The value is
    log svol(A) + ||Y - A S||_F^2 / (lam * T).
    """
    A = check_vertex_matrix(A, min_vertices=2)
    Y = _check_data(Y, A)
    _check_lambda(lam)
    T = Y.shape[1]
    if S is None:
        S, _ = project_to_simplex_batch(Y, A)
    else:
        S = np.asarray(S, dtype=float)
        if S.shape != (A.shape[1], T):
            raise ShapeError(f"S must have shape ({A.shape[1]}, {T})")
        if np.any(S < -1e-10) or np.max(np.abs(S.sum(axis=0) - 1.0)) > 1e-8:
            raise DomainError("columns of S must lie on the unit simplex")
    R = Y - A @ S
    return float(log_simplex_volume(A) + np.sum(R * R) / (lam * T))


@dataclass
class PolyhedralForm:
    """Half-space description of a full-dimensional simplex.

    Columns b_1..b_{N-1} of B plus (b_N, c_N) define membership through
    b_i^T y >= c_i for i = 1..N.
    """

    B: np.ndarray
    c: np.ndarray
    bN: np.ndarray
    cN: float

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.bN = np.asarray(self.bN, dtype=float)
        self.cN = float(self.cN)
        k = self.B.shape[0]
        if self.B.shape != (k, k):
            raise ShapeError("B must be square ((N-1) x (N-1))")
        if self.c.shape != (k,) or self.bN.shape != (k,):
            raise ShapeError("c and bN must have length N-1")
        ok = (
            np.all(np.isfinite(self.B))
            and np.all(np.isfinite(self.c))
            and np.all(np.isfinite(self.bN))
            and np.isfinite(self.cN)
        )
        if not ok:
            raise DomainError("polyhedral form contains non-finite entries")

    @property
    def N(self) -> int:
        return self.B.shape[0] + 1


def simplex_to_polyhedron(A) -> PolyhedralForm:
    """Half-space form of the simplex spanned by A ((N-1) x N, full dimensional)."""
    A = check_vertex_matrix(A, min_vertices=2)
    M, N = A.shape
    if M != N - 1:
        raise ShapeError("polyhedral form needs a full-dimensional simplex (M = N-1)")
    if not is_affinely_independent(A):
        raise ModelError("vertices are affinely dependent")
    E = edge_matrix(A)
    eye = np.eye(N - 1)
    B = np.linalg.solve(E.T, eye)
    c = np.linalg.solve(E, A[:, -1])
    bN = -B @ np.ones(N - 1)
    cN = -float(c.sum()) - 1.0
    return PolyhedralForm(B=B, c=c, bN=bN, cN=cN)


def polyhedron_to_simplex(P: PolyhedralForm):
    """Vertex matrix of a polyhedral form; inverse of simplex_to_polyhedron."""
    try:
        E = np.linalg.solve(P.B, np.eye(P.N - 1)).T
    except np.linalg.LinAlgError as exc:
        raise ModelError("B is singular; the form does not describe a simplex") from exc
    aN = E @ P.c
    return np.hstack([E + aN[:, None], aN[:, None]])


def polyhedron_margins(P: PolyhedralForm, Y):
    """Stacked margins b_i^T y - c_i, one row per facet i = 1..N."""
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    if single:
        Y = Y[:, None]
    if Y.shape[0] != P.N - 1:
        raise ShapeError("points must live in the (N-1)-dimensional space of the form")
    upper = P.B.T @ Y - P.c[:, None]
    last = P.bN @ Y - P.cN
    out = np.vstack([upper, last[None, :]])
    return out[:, 0] if single else out


def sisal_objective(P: PolyhedralForm, Y, lam):
    """Negative log determinant plus hinge penalties on facet violations."""
    _check_lambda(lam)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeError("Y must be a 2-D array")
    sign, logdet = np.linalg.slogdet(P.B)
    if sign == 0.0:
        return float("inf")
    margins = polyhedron_margins(P, Y)
    hinge = np.maximum(-margins, 0.0)
    return float(-logdet + hinge.sum() / (lam * Y.shape[1]))


def chance_objective(P: PolyhedralForm, Y, sigma):
    """Negative log determinant plus the worst-facet Gaussian tail penalty."""
    _check_sigma(sigma)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeError("Y must be a 2-D array")
    sign, logdet = np.linalg.slogdet(P.B)
    if sign == 0.0:
        return float("inf")
    margins = polyhedron_margins(P, Y)
    norms = np.sqrt(
        np.concatenate([np.sum(P.B * P.B, axis=0), [float(P.bN @ P.bN)]])
    )
    z = margins / (sigma * norms[:, None])
    penalty = np.max(-log_ndtr(z), axis=0)
    return float(-logdet + penalty.mean())


def chance_bound_pdf(y, A, sigma, log=False):
    """Upper bound on the observation density: min-facet Gaussian cdf over svol.

    With log=True the natural logarithm of the bound is returned, which stays
    finite far outside the simplex where the plain value underflows.
    """
    _check_sigma(sigma)
    A = check_vertex_matrix(A, min_vertices=2)
    P = simplex_to_polyhedron(A)
    vol = simplex_volume(A)
    y = np.asarray(y, dtype=float)
    margins = polyhedron_margins(P, y)
    norms = np.sqrt(
        np.concatenate([np.sum(P.B * P.B, axis=0), [float(P.bN @ P.bN)]])
    )
    if margins.ndim == 1:
        z = margins / (sigma * norms)
        log_bound = float(np.min(log_ndtr(z))) - np.log(vol)
        return log_bound if log else float(np.exp(log_bound))
    z = margins / (sigma * norms[:, None])
    log_bound = np.min(log_ndtr(z), axis=0) - np.log(vol)
    return log_bound if log else np.exp(log_bound)


def generalized_edge_smooth(A, Y, lam, sigma, S=None):
    """Edge-smooth objective valid for any ambient dimension M >= N-1.

    Adds to the volume and fit terms a penalty on the squared distances to
    the affine hull of A, weighted by 1/(2 sigma^2) - 1/lam.  At M = N-1 the
    distances vanish and the value reduces to edge_smooth_objective.
    """
    A = check_vertex_matrix(A, min_vertices=2)
    Y = _check_data(Y, A)
    _check_lambda(lam)
    _check_sigma(sigma)
    T = Y.shape[1]
    if S is None:
        S, _ = project_to_simplex_batch(Y, A)
    else:
        S = np.asarray(S, dtype=float)
        if S.shape != (A.shape[1], T):
            raise ShapeError(f"S must have shape ({A.shape[1]}, {T})")
    R = Y - A @ S
    fit = np.sum(R * R) / (lam * T)
    E = edge_matrix(A)
    Xc = Y - A[:, -1:]
    resid = Xc - E @ (pseudo_inverse(E) @ Xc)
    d2 = np.sum(resid * resid, axis=0)
    extra = (1.0 / (2.0 * sigma * sigma) - 1.0 / lam) * float(d2.mean())
    return float(log_simplex_volume(A) + fit + extra)
