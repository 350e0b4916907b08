"""Variational solver with an independent Dirichlet family per point.

Minimising the negative evidence bound in the Dirichlet concentration vector
alpha splits into a smooth quadratic part g (data fit), separable coordinate
penalties, and a penalty on the concentration sum eta.  For fixed eta the
problem is strictly convex and is solved by ADMM: the quadratic step is a
linear solve restricted to the fixed-sum hyperplane, the separable step is a
per-coordinate scalar root-find by bisection.  The outer one-dimensional
problem in eta is unimodal in practice and is searched by golden section on
log eta.  Vertex updates given all concentrations are closed-form least
squares.

All inner machinery is vectorised across points; the public per-point
operations delegate to the same code with a batch of one.
"""

from __future__ import annotations

import math
import time
import warnings as _pywarnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ShapeError
from .mathcore import digamma, log_gamma, null_one_basis, trigamma
from .metrics import mse as _mse_metric
from .report import SolverReport

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # golden-section shrink factor

# Bernoulli-number coefficients of the psi' asymptotic series
_TRI_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _trigamma_fast(x):
    """psi'(x) for strictly positive array arguments.

    Shifts unconditionally by 10 via the recurrence and sums the asymptotic
    series, all branch-free.  Agrees with mathcore.trigamma to machine
    precision on (0, inf).
    """
    acc = 0.0
    for j in range(10):
        xj = x + j
        acc = acc + 1.0 / (xj * xj)
    z = x + 10.0
    t = 1.0 / z
    t2 = t * t
    tail = _TRI_COEFFS[6]
    for k in range(5, -1, -1):
        tail = _TRI_COEFFS[k] + t2 * tail
    return acc + t + t2 * (0.5 + t * tail)


# The bisection root-finds evaluate psi' millions of times on small arrays,
# where the series recurrence is dominated by per-op overhead.  A cubic
# spline of psi'(e^t) on a uniform log grid reproduces it to ~5e-13 relative
# error over beta in [1e-12, 1e12] at a fraction of the cost.
_PSI1_LO = 1e-12
_PSI1_HI = 1e12
_psi1_tables = None


def _psi1_build():
    global _psi1_tables
    if _psi1_tables is None:
        from scipy.interpolate import CubicSpline

        t0, t1 = math.log(_PSI1_LO), math.log(_PSI1_HI)
        n = 30000
        knots = np.linspace(t0, t1, n)
        cs = CubicSpline(knots, _trigamma_fast(np.exp(knots)))
        c3, c2, c1, c0 = (np.ascontiguousarray(cs.c[k]) for k in range(4))
        _psi1_tables = (t0, (n - 1) / (t1 - t0), knots, c3, c2, c1, c0)
    return _psi1_tables


def _psi1_interp(beta):
    """Spline evaluation of psi' at positive beta inside the table range."""
    t0, inv_dt, knots, c3, c2, c1, c0 = _psi1_build()
    lt = np.log(beta)
    idx = np.clip(((lt - t0) * inv_dt).astype(np.int64), 0, knots.size - 2)
    d = lt - knots[idx]
    return ((c3[idx] * d + c2[idx]) * d + c1[idx]) * d + c0[idx]


@dataclass
class ViaConfig:
    """Settings of the variational solver.

    golden_interval brackets the concentration sum; the search widens an
    endpoint tenfold (up to max_widenings times) when the minimiser lands
    within endpoint_margin of it.  golden_tol is the relative width at which
    the eta search stops; admm_dual_tol is the norm of alpha - beta at which
    the splitting iteration stops; bisect_tol is the relative tolerance of
    the per-coordinate root-finds.
    """

    rho: float = 0.01
    admm_dual_tol: float = 0.005
    admm_max_iters: int = 5000
    max_outer_iters: int = 100
    golden_interval: tuple = (0.1, 1.0e4)
    golden_tol: float = 0.05
    bisect_tol: float = 1e-9
    rel_tol: float = 1e-6
    warm_start: bool = True
    endpoint_margin: float = 0.05
    max_widenings: int = 2
    eta_refresh_every: int = 5

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0.0):
            raise DomainError("rho must be positive")
        if not (0.0 < self.admm_dual_tol < 1.0):
            raise DomainError("admm_dual_tol must lie in (0, 1)")
        if self.admm_max_iters < 1 or self.max_outer_iters < 1:
            raise DomainError("iteration caps must be >= 1")
        a, b = self.golden_interval
        if not (0.0 < a < b and np.isfinite(b)):
            raise DomainError("golden_interval must satisfy 0 < a < b < inf")
        if not (0.0 < self.golden_tol < 1.0):
            raise DomainError("golden_tol must lie in (0, 1)")
        if not (0.0 < self.bisect_tol < 1.0):
            raise DomainError("bisect_tol must lie in (0, 1)")
        if not (0.0 < self.rel_tol < 1.0):
            raise DomainError("rel_tol must lie in (0, 1)")
        if not (0.0 < self.endpoint_margin < 0.5):
            raise DomainError("endpoint_margin must lie in (0, 0.5)")
        if self.max_widenings < 0:
            raise DomainError("max_widenings must be >= 0")
        if self.eta_refresh_every < 1:
            raise DomainError("eta_refresh_every must be >= 1")


@dataclass
class VariationalState:
    """A vertex estimate together with each point's Dirichlet parameters."""

    A: np.ndarray
    alphas: np.ndarray  # N x T, one concentration vector per point
    sigma: float

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.A.ndim != 2 or self.alphas.ndim != 2:
            raise ShapeError("A and alphas must be 2-D")
        if self.A.shape[1] != self.alphas.shape[0]:
            raise ShapeError("alphas must have one row per vertex")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError("sigma must be positive")


def concentration_penalty(x):
    """Per-coordinate negative-entropy term: -log Gamma(x) + (x-1) psi(x)."""
    return -log_gamma(x) + (np.asarray(x, dtype=float) - 1.0) * digamma(x)


def concentration_penalty_deriv(x):
    """Derivative (x-1) psi'(x) of concentration_penalty; increasing on (0, inf)."""
    return (np.asarray(x, dtype=float) - 1.0) * trigamma(x)


def total_concentration_penalty(eta, n):
    """Sum-of-concentrations term: log Gamma(eta) - (eta - n) psi(eta)."""
    eta_arr = np.asarray(eta, dtype=float)
    return log_gamma(eta) - (eta_arr - float(n)) * digamma(eta)


def negative_elbo(A, alpha, y, sigma):
    """Per-point negative evidence bound, additive constant dropped.

    Equals the data-fit quadratic g plus the coordinate and sum penalties;
    adding negative_elbo_constant gives the exact negative bound value.
    """
    A = np.asarray(A, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or alpha.shape != (A.shape[1],) or y.shape != (A.shape[0],):
        raise ShapeError("need A (M,N), alpha (N,), y (M,)")
    if not np.all(alpha > 0.0):
        raise DomainError("alpha must be positive")
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise DomainError("sigma must be positive")
    eta = float(alpha.sum())
    G = A.T @ A
    g = (
        -(y @ A @ alpha) / eta
        + (np.diag(G) @ alpha + alpha @ G @ alpha) / (2.0 * (1.0 + eta) * eta)
    ) / (sigma * sigma)
    return float(
        g
        + np.sum(concentration_penalty(alpha))
        + total_concentration_penalty(eta, alpha.size)
    )


def negative_elbo_constant(y, sigma, N):
    """Constant dropped by negative_elbo: data term, Gaussian normaliser, prior."""
    y = np.asarray(y, dtype=float)
    M = y.size
    return float(
        (y @ y) / (2.0 * sigma * sigma)
        + M * math.log(math.sqrt(2.0 * math.pi) * sigma)
        - log_gamma(N)
    )


def vertex_update(Y, alphas, warn: Optional[list] = None):
    """Closed-form least-squares update of the vertex matrix.

    A = [sum_t y_t alpha_t^T / eta_t] [sum_t R(alpha_t) / ((1+eta_t) eta_t)]^-1
    with R(alpha) = Diag(alpha) + alpha alpha^T.  Falls back to the
    pseudo-inverse (noted in `warn` if given) when the Gram sum is singular.
    """
    Y = np.asarray(Y, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if Y.ndim != 2 or alphas.ndim != 2 or Y.shape[1] != alphas.shape[1]:
        raise ShapeError("Y (M,T) and alphas (N,T) must share T")
    if not np.all(alphas > 0.0):
        raise DomainError("alphas must be positive")
    eta = alphas.sum(axis=0)
    C1 = Y @ (alphas / eta).T
    w = 1.0 / ((1.0 + eta) * eta)
    Aw = alphas * w
    C2 = np.diag(Aw.sum(axis=1)) + Aw @ alphas.T
    try:
        return np.linalg.solve(C2.T, C1.T).T
    except np.linalg.LinAlgError:
        if warn is not None:
            warn.append("vertex update used a pseudo-inverse (singular Gram sum)")
        from .mathcore import pseudo_inverse

        return C1 @ pseudo_inverse(C2)


class _QuadFactors:
    """Per-(A, sigma) precomputations shared by every inner solve."""

    __slots__ = ("A", "N", "sigma2", "G", "diagG", "G1", "U", "UV", "evals")

    def __init__(self, A, sigma):
        A = np.asarray(A, dtype=float)
        self.A = A
        self.N = A.shape[1]
        self.sigma2 = float(sigma) ** 2
        self.G = A.T @ A
        self.diagG = np.diag(self.G).copy()
        self.G1 = self.G @ np.ones(self.N)
        self.U = null_one_basis(self.N)
        W = self.U.T @ self.G @ self.U
        evals, V = np.linalg.eigh((W + W.T) / 2.0)
        self.evals = np.maximum(evals, 0.0)
        self.UV = self.U @ V


def _point_values(quad: _QuadFactors, P, alphas):
    """g + penalties for every column of alphas (P holds A^T y per column)."""
    eta = alphas.sum(axis=0)
    Ga = quad.G @ alphas
    quad_term = (quad.diagG @ alphas + np.sum(alphas * Ga, axis=0)) / (
        2.0 * (1.0 + eta) * eta
    )
    lin = np.sum(P * alphas, axis=0) / eta
    g = (-lin + quad_term) / quad.sigma2
    h_sum = np.sum(-log_gamma(alphas) + (alphas - 1.0) * digamma(alphas), axis=0)
    iota = log_gamma(eta) - (eta - quad.N) * digamma(eta)
    return g + h_sum + iota


def _beta_root(target, rho, warm, tol):
    """Solve (b-1) psi'(b) + rho b = target coordinate-wise by bisection.

    The left side is strictly increasing with range (-inf, inf), so a root
    exists and is unique; warm brackets from the previous iterate are tried
    first and replaced by safe ones where the sign condition fails.  tol is
    a relative width tolerance, broadcastable against target.
    """

    def F(b):
        return (b - 1.0) * _psi1_interp(b) + rho * b - target

    safe_lo = np.full_like(target, 1e-10)
    safe_hi = np.minimum(np.maximum(1.0, target / rho) + 1.0, _PSI1_HI)
    lo = warm * 0.5
    hi = warm * 2.0
    lo = np.where(F(lo) < 0.0, lo, safe_lo)
    hi = np.where(F(hi) > 0.0, hi, safe_hi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if np.all(hi - lo <= tol * np.maximum(1.0, mid)):
            break
        neg = F(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def _alpha_step(quad: _QuadFactors, b, c, base, beta, lam, rho, Gc1):
    """Equality-constrained quadratic step, solved in the zero-sum eigenbasis."""
    X = b + rho * beta - lam - Gc1
    Z = quad.UV.T @ X
    return base[None, :] + quad.UV @ (Z / (quad.evals[:, None] * c[None, :] + rho))


def _admm_batch(quad: _QuadFactors, P, eta, cfg: ViaConfig, beta=None, lam=None):
    """Fixed-eta inner solves for a batch of points, one column each.

    Returns (alpha, value, iters, capped, beta, lam); alpha columns are
    strictly positive with exact sums eta, value is g + coordinate penalties
    at alpha (the concentration-sum penalty is not included).
    """
    N = quad.N
    Tb = eta.size
    rho = cfg.rho
    s2 = quad.sigma2
    c_all = 1.0 / (s2 * (1.0 + eta) * eta)
    b_all = (P - quad.diagG[:, None] / (2.0 * (eta + 1.0))) / (s2 * eta)
    base_all = eta / N
    if beta is None:
        beta = np.broadcast_to(base_all, (N, Tb)).copy()
        lam = np.zeros((N, Tb))
    else:
        beta = beta * (eta / beta.sum(axis=0))
        lam = lam.copy()

    out_alpha = np.empty((N, Tb))
    out_beta = np.empty((N, Tb))
    out_lam = np.empty((N, Tb))
    iters = np.zeros(Tb, dtype=np.int64)
    capped = np.zeros(Tb, dtype=bool)

    act = np.arange(Tb)
    B_, L_ = beta, lam
    b_, c_, base_ = b_all, c_all, base_all
    Gc1_ = np.outer(quad.G1, base_all * c_all)
    resid = np.full(Tb, np.inf)
    it = 0
    while act.size and it < cfg.admm_max_iters:
        it += 1
        alpha_ = _alpha_step(quad, b_, c_, base_, B_, L_, rho, Gc1_)
        # root accuracy tied to the current splitting residual: coarse while
        # far from consensus, down to cfg.bisect_tol near it
        tol_b = np.clip(0.05 * resid[act], cfg.bisect_tol, 1e-3)
        B_ = _beta_root(L_ + rho * alpha_, rho, B_, tol_b)
        L_ = L_ + rho * (alpha_ - B_)
        r = np.sqrt(np.sum((alpha_ - B_) ** 2, axis=0))
        resid[act] = r
        done = r <= cfg.admm_dual_tol
        ndone = int(done.sum())
        # compact only when enough columns finished, to bound slicing cost
        if ndone and (ndone == act.size or ndone >= max(16, act.size // 8)):
            cols = act[done]
            iters[cols] = it
            out_alpha[:, cols] = alpha_[:, done]
            out_beta[:, cols] = B_[:, done]
            out_lam[:, cols] = L_[:, done]
            keep = ~done
            act = act[keep]
            B_, L_ = B_[:, keep], L_[:, keep]
            b_, c_, base_ = b_[:, keep], c_[keep], base_[keep]
            Gc1_ = Gc1_[:, keep]
    if act.size:
        iters[act] = it
        capped[act] = resid[act] > cfg.admm_dual_tol
        out_alpha[:, act] = np.maximum(B_, 1e-12)
        out_beta[:, act] = B_
        out_lam[:, act] = L_

    # Report alpha through the separable iterate, which is strictly positive;
    # rescaling enforces the exact sum without leaving the positive orthant.
    alpha_out = np.maximum(out_beta, 1e-300)
    alpha_out = alpha_out * (eta / alpha_out.sum(axis=0))
    eta_v = alpha_out.sum(axis=0)
    Ga = quad.G @ alpha_out
    quad_term = (quad.diagG @ alpha_out + np.sum(alpha_out * Ga, axis=0)) / (
        2.0 * (1.0 + eta_v) * eta_v
    )
    lin = np.sum(P * alpha_out, axis=0) / eta_v
    g = (-lin + quad_term) / s2
    h_sum = np.sum(
        -log_gamma(alpha_out) + (alpha_out - 1.0) * digamma(alpha_out), axis=0
    )
    return alpha_out, g + h_sum, iters, capped, out_beta, out_lam


class _WarmState:
    """Per-point ADMM carry-over between eta evaluations and outer iterations."""

    __slots__ = ("beta", "lam", "ready")

    def __init__(self, N, T):
        self.beta = np.empty((N, T))
        self.lam = np.zeros((N, T))
        self.ready = np.zeros(T, dtype=bool)

    def fetch(self, cols):
        if np.all(self.ready[cols]):
            return self.beta[:, cols], self.lam[:, cols]
        return None, None

    def store(self, cols, beta, lam):
        self.beta[:, cols] = beta
        self.lam[:, cols] = lam
        self.ready[cols] = True


def _eval_eta_batch(quad, P_sub, u, cfg, warm: _WarmState, gcols):
    """Evaluate the eta-profile objective at log-sums u.

    P_sub holds one column per point being evaluated; gcols maps those
    columns to positions in the warm-state arrays.
    """
    eta = np.exp(u)
    beta, lam = warm.fetch(gcols)
    alpha, val, iters, capped, beta_out, lam_out = _admm_batch(
        quad, P_sub, eta, cfg, beta, lam
    )
    warm.store(gcols, beta_out, lam_out)
    total = val + (log_gamma(eta) - (eta - quad.N) * digamma(eta))
    return alpha, total, iters, capped


def _golden_batch(quad, P_sub, u1, u2, cfg, warm, gcols, stats):
    """Lockstep golden-section search on log eta with per-point intervals.

    Returns (alpha_star, eta_star, value_star) for all points of P_sub.
    stats is a dict accumulating ADMM iteration counts and cap events.
    """
    Tb = u1.size
    all_idx = np.arange(Tb)
    span = u2 - u1
    u3 = u2 - span * _INV_PHI
    u4 = u1 + span * _INV_PHI

    def ev(u, idx):
        alpha, val, iters, capped = _eval_eta_batch(
            quad, P_sub[:, idx], u, cfg, warm, gcols[idx]
        )
        stats["admm_iters"] += int(iters.sum())
        stats["admm_solves"] += idx.size
        stats["admm_capped"] += int(capped.sum())
        return val

    f3 = ev(u3, all_idx)
    f4 = ev(u4, all_idx)
    width_tol = math.log1p(cfg.golden_tol)
    for _ in range(200):
        active = (u2 - u1) > width_tol
        if not active.any():
            break
        move = active & (f3 < f4)
        stay = active & ~move
        # shrink toward the lower interior point
        u2[move] = u4[move]
        u4[move] = u3[move]
        f4[move] = f3[move]
        u3[move] = u2[move] - (u2[move] - u1[move]) * _INV_PHI
        # shrink toward the upper interior point
        u1[stay] = u3[stay]
        u3[stay] = u4[stay]
        f3[stay] = f4[stay]
        u4[stay] = u1[stay] + (u2[stay] - u1[stay]) * _INV_PHI
        idx = np.flatnonzero(active)
        new_u = np.where(move, u3, u4)[idx]
        new_f = ev(new_u, idx)
        f3[idx[move[idx]]] = new_f[move[idx]]
        f4[idx[stay[idx]]] = new_f[stay[idx]]
    u_star = 0.5 * (u1 + u2)
    alpha, val, iters, capped = _eval_eta_batch(quad, P_sub, u_star, cfg, warm, gcols)
    stats["admm_iters"] += int(iters.sum())
    stats["admm_solves"] += Tb
    stats["admm_capped"] += int(capped.sum())
    return alpha, np.exp(u_star), val


def _solve_points_batch(quad, P, cfg: ViaConfig, warm, eta_hint, stats, widen_rounds):
    """Golden searches with endpoint-escape widening for every point."""
    Tb = P.shape[1]
    glo, ghi = math.log(cfg.golden_interval[0]), math.log(cfg.golden_interval[1])
    if eta_hint is None:
        u_lo = np.full(Tb, glo)
        u_hi = np.full(Tb, ghi)
    else:
        # narrow window around the previous optimum; endpoint escapes below
        # recover the occasional point whose optimum drifts further
        centre = np.log(eta_hint)
        half = 0.2 * math.log(10.0)
        u_lo = centre - half
        u_hi = centre + half
    alpha = np.empty((quad.N, Tb))
    eta = np.empty(Tb)
    val = np.empty(Tb)
    idx = np.arange(Tb)
    for round_no in range(widen_rounds + 1):
        a, e, v = _golden_batch(
            quad, P[:, idx], u_lo.copy(), u_hi.copy(), cfg, warm, idx, stats
        )
        alpha[:, idx] = a
        eta[idx] = e
        val[idx] = v
        if round_no == widen_rounds:
            break
        span = u_hi - u_lo
        u_star = np.log(eta[idx])
        near_lo = u_star <= u_lo + cfg.endpoint_margin * span
        near_hi = u_star >= u_hi - cfg.endpoint_margin * span
        redo = near_lo | near_hi
        if not redo.any():
            break
        widen = math.log(10.0)
        u_lo = np.where(near_lo, u_lo - widen, u_lo)[redo]
        u_hi = np.where(near_hi, u_hi + widen, u_hi)[redo]
        idx = idx[redo]
        stats["widened_points"] += int(redo.sum())
    return alpha, eta, val


def admm_subsolve(A, y, sigma, eta, config: ViaConfig = None, warm=None):
    """Best concentration vector with the given sum eta, for a single point.

    Returns (alpha, value) where value is the inner objective g plus the
    coordinate penalties at alpha (the sum penalty depends only on eta and
    is added by callers that compare across eta).
    """
    config = config or ViaConfig()
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise ShapeError("need A (M,N) and y (M,)")
    if not (np.isfinite(eta) and eta > 0.0):
        raise DomainError("eta must be positive")
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise DomainError("sigma must be positive")
    quad = _QuadFactors(A, sigma)
    P = A.T @ y[:, None]
    beta = lam = None
    if warm is not None:
        beta = np.asarray(warm[0], dtype=float)[:, None]
        lam = np.asarray(warm[1], dtype=float)[:, None]
    alpha, val, _, capped, _, _ = _admm_batch(
        quad, P, np.array([float(eta)]), config, beta, lam
    )
    if capped[0]:
        _pywarnings.warn(
            "ADMM hit its iteration cap; returning the best iterate",
            RuntimeWarning,
        )
    return alpha[:, 0], float(val[0])


def solve_variational(A, y, sigma, config: ViaConfig = None):
    """Full per-point variational solve: golden search on the concentration sum.

    Returns (alpha, value); value is the per-point objective g + penalties
    including the sum penalty, i.e. negative_elbo at the optimum.
    """
    config = config or ViaConfig()
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise ShapeError("need A (M,N) and y (M,)")
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise DomainError("sigma must be positive")
    quad = _QuadFactors(A, sigma)
    P = A.T @ y[:, None]
    warm = _WarmState(quad.N, 1)
    stats = _new_stats()
    alpha, eta, val = _solve_points_batch(
        quad, P, config, warm, None, stats, config.max_widenings
    )
    if stats["admm_capped"]:
        _pywarnings.warn(
            "some inner solves hit the ADMM iteration cap", RuntimeWarning
        )
    return alpha[:, 0], float(val[0])


def _new_stats():
    return {"admm_iters": 0, "admm_solves": 0, "admm_capped": 0, "widened_points": 0}


def _fixed_eta_solve(quad, P, etas, cfg, warm, stats):
    """Re-solve every point at its previously found concentration sum."""
    u = np.log(etas)
    gcols = np.arange(etas.size)
    alpha, val, iters, capped = _eval_eta_batch(quad, P, u, cfg, warm, gcols)
    stats["admm_iters"] += int(iters.sum())
    stats["admm_solves"] += etas.size
    stats["admm_capped"] += int(capped.sum())
    return alpha, etas.copy(), val


def variational_objective(state: VariationalState, Y, include_entropy=True):
    """Data-scale objective of a variational state: fit plus spread minus entropy.

    Computed through the moment identities: for each point,
    ||y - A xi||^2/(2 sigma^2) + total_variance/(2 sigma^2) - entropy, with
    xi the Dirichlet mean.  include_entropy=False drops the entropy term.
    """
    Y = np.asarray(Y, dtype=float)
    A, alphas, sigma = state.A, state.alphas, state.sigma
    if Y.ndim != 2 or Y.shape != (A.shape[0], alphas.shape[1]):
        raise ShapeError("Y must be M x T matching the state")
    if not np.all(alphas > 0.0):
        raise DomainError("state alphas must be positive")
    eta = alphas.sum(axis=0)
    Xi = alphas / eta
    R = Y - A @ Xi
    fit = np.sum(R * R, axis=0)
    col_sq = np.sum(A * A, axis=0)
    tvar = (col_sq @ Xi - np.sum((A @ Xi) ** 2, axis=0)) / (1.0 + eta)
    total = (fit + tvar) / (2.0 * sigma * sigma)
    if include_entropy:
        N = alphas.shape[0]
        log_beta = np.sum(log_gamma(alphas), axis=0) - log_gamma(eta)
        H = log_beta + (eta - N) * digamma(eta) - np.sum(
            (alphas - 1.0) * digamma(alphas), axis=0
        )
        total = total - H
    return float(total.sum())


def via_fit(Y, config: ViaConfig, A_init, sigma, truth_A0=None) -> SolverReport:
    """Alternate per-point variational solves with least-squares vertex updates.

    The recorded objective (variational_objective of the current state) is
    non-increasing by construction: each point keeps its previous
    concentration vector whenever the fresh solve fails to improve it, and
    the vertex update is an exact minimiser given the concentrations.
    """
    Y = np.asarray(Y, dtype=float)
    A = np.asarray(A_init, dtype=float).copy()
    if Y.ndim != 2 or A.ndim != 2 or Y.shape[0] != A.shape[0]:
        raise ShapeError("Y and A_init must share their row dimension")
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise DomainError("sigma must be positive")
    config = config or ViaConfig()
    M, T = Y.shape
    N = A.shape[1]
    t0 = time.perf_counter()
    warnings: list[str] = []
    trace: list[float] = []
    mse_trace: list[float] = []
    eta_stats: list[tuple] = []
    admm_means: list[float] = []
    alphas = None
    etas = None
    warm = _WarmState(N, T)
    const = float(np.sum(Y * Y) / (2.0 * sigma * sigma))
    iterations = 0
    for k in range(config.max_outer_iters):
        quad = _QuadFactors(A, sigma)
        P = A.T @ Y
        stats = _new_stats()
        hint = etas if (config.warm_start and etas is not None) else None
        if not config.warm_start:
            warm = _WarmState(N, T)
        # full eta searches periodically; in between, re-solve each point at
        # its previous eta (the vertex safeguard below keeps descent either way)
        refresh = hint is None or k < 2 or (k % config.eta_refresh_every == 0)
        if refresh:
            widen = config.max_widenings if hint is None else max(config.max_widenings, 4)
            alphas_new, etas_new, _ = _solve_points_batch(
                quad, P, config, warm, hint, stats, widen
            )
        else:
            alphas_new, etas_new, _ = _fixed_eta_solve(
                quad, P, etas, config, warm, stats
            )
        if alphas is not None:
            # keep the incumbent wherever the fresh solve is not an improvement
            f_new = _point_values(quad, P, alphas_new)
            f_old = _point_values(quad, P, alphas)
            worse = f_new > f_old
            if worse.any():
                alphas_new[:, worse] = alphas[:, worse]
                etas_new[worse] = etas[worse]
        alphas, etas = alphas_new, etas_new
        A_new = vertex_update(Y, alphas, warn=warnings)
        rel = np.linalg.norm(A_new - A) / max(np.linalg.norm(A), 1e-300)
        A = A_new
        iterations = k + 1

        quad_new = _QuadFactors(A, sigma)
        obj = float(np.sum(_point_values(quad_new, A.T @ Y, alphas))) + const
        trace.append(obj)
        eta_stats.append(
            (float(np.median(etas)), float(etas.min()), float(etas.max()))
        )
        admm_means.append(stats["admm_iters"] / max(stats["admm_solves"], 1))
        if stats["admm_capped"]:
            warnings.append(
                f"iteration {k + 1}: {stats['admm_capped']} inner solves hit the ADMM cap"
            )
        if truth_A0 is not None:
            mse_trace.append(_mse_metric(truth_A0, A)[0])
        if rel < config.rel_tol:
            break

    return SolverReport(
        method="via",
        a_final=A,
        iterations=iterations,
        objective_trace=np.asarray(trace),
        config=asdict(config),
        wall_time=time.perf_counter() - t0,
        seed=None,
        warnings=warnings,
        mse_trace=np.asarray(mse_trace) if truth_A0 is not None else None,
        extras={
            "eta_median_min_max": np.asarray(eta_stats),
            "mean_admm_iters": np.asarray(admm_means),
            "final_etas": etas,
            "final_alphas": alphas,
        },
    )
