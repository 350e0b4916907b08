"""Generative model: uniform simplex sources, Gaussian noise, MC likelihood.

Observations follow y_t = A0 s_t + v_t with s_t drawn uniformly from the unit
simplex (a symmetric Dirichlet with all parameters one) and v_t zero-mean
isotropic Gaussian noise with standard deviation sigma.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InsufficientDataError, ModelError, ShapeError
from .mathcore import (
    check_vertex_matrix,
    digamma,
    edge_matrix,
    is_affinely_independent,
    log_gamma,
    logsumexp,
    simplex_volume,
)

SNR_CONVENTION = "snr_db = 10*log10(E||A s||^2 / (M sigma^2))"


def as_generator(seed):
    """Accept an integer seed, a SeedSequence, a Generator, or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass
class DirichletParam:
    """Concentration vector of a Dirichlet distribution (all entries > 0)."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.ndim != 1 or self.alpha.size < 2:
            raise ShapeError("alpha must be a 1-D vector with at least 2 entries")
        if not np.all(np.isfinite(self.alpha) & (self.alpha > 0.0)):
            raise DomainError("alpha entries must be finite and positive")

    @property
    def total(self) -> float:
        return float(self.alpha.sum())


@dataclass
class Dataset:
    """Observed data plus optional ground truth from synthesis."""

    Y: np.ndarray
    A0: Optional[np.ndarray] = None
    S0: Optional[np.ndarray] = None
    sigma: Optional[float] = None
    seed: Optional[int] = None
    snr_db: Optional[float] = None
    snr_convention: str = SNR_CONVENTION

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim != 2 or self.Y.shape[1] < 1:
            raise ShapeError("Y must be M x T with T >= 1")
        if not np.all(np.isfinite(self.Y)):
            raise DomainError("Y contains non-finite entries")

    @property
    def M(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.Y.shape[1]


def _check_alpha(alpha):
    if isinstance(alpha, DirichletParam):
        return alpha.alpha
    return DirichletParam(np.asarray(alpha, dtype=float)).alpha


def sample_dirichlet(alpha, count, seed=None):
    """Draw `count` Dirichlet(alpha) vectors as the columns of an N x count array.

    The symmetric all-ones case (uniform distribution on the simplex) uses
    normalised unit-rate exponentials; the general case uses normalised gamma
    variates.  Every returned column is strictly positive and sums to one.
    """
    alpha = _check_alpha(alpha)
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise DomainError(f"count must be a positive integer, got {count!r}")
    rng = as_generator(seed)
    N = alpha.size
    uniform_case = bool(np.all(alpha == 1.0))

    def draw(k):
        if uniform_case:
            return rng.standard_exponential((N, k))
        return rng.standard_gamma(alpha[:, None], size=(N, int(k)))

    g = draw(count)
    # A gamma variate of exactly zero has probability ~2^-53 per draw but would
    # break the strict-positivity contract, so redraw such columns.
    for _ in range(100):
        bad = np.flatnonzero(~np.all(g > 0.0, axis=0))
        if bad.size == 0:
            break
        g[:, bad] = draw(bad.size)
    s = g / g.sum(axis=0, keepdims=True)
    return s


def dirichlet_moments(alpha):
    """Mean vector, covariance matrix, and differential entropy of Dirichlet(alpha)."""
    alpha = _check_alpha(alpha)
    a0 = float(alpha.sum())
    mean = alpha / a0
    cov = (np.diag(mean) - np.outer(mean, mean)) / (a0 + 1.0)
    N = alpha.size
    log_beta = float(np.sum(log_gamma(alpha)) - log_gamma(a0))
    entropy = log_beta + (a0 - N) * digamma(a0) - float(
        np.sum((alpha - 1.0) * digamma(alpha))
    )
    return mean, cov, entropy


def dirichlet_logpdf(s, alpha):
    """Log density of Dirichlet(alpha) at the columns of s (with respect to the
    simplex's (N-1)-dimensional Lebesgue measure)."""
    alpha = _check_alpha(alpha)
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    S = s[:, None] if single else s
    if S.shape[0] != alpha.size:
        raise ShapeError("s and alpha dimensions disagree")
    if np.any(np.abs(S.sum(axis=0) - 1.0) > 1e-8):
        raise DomainError("columns of s must sum to one")
    log_beta = float(np.sum(log_gamma(alpha)) - log_gamma(alpha.sum()))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (alpha[:, None] - 1.0) * np.log(S)
        out = np.where((S <= 0.0) & (alpha[:, None] == 1.0), 0.0, out)
    vals = out.sum(axis=0) - log_beta
    vals = np.where(np.any(S < 0.0, axis=0), -np.inf, vals)
    return float(vals[0]) if single else vals


def uniform_simplex_pdf(x, B, tol=1e-12):
    """Density at x of B s with s uniform on the simplex, B of size (N-1) x N.

    Equals 1/svol(B) strictly inside the spanned simplex and 0 elsewhere;
    points are classified through their barycentric coordinates.
    """
    B = check_vertex_matrix(B, min_vertices=2)
    Mdim, N = B.shape
    if Mdim != N - 1:
        raise ShapeError("uniform_simplex_pdf needs a full-dimensional simplex (M = N-1)")
    vol = simplex_volume(B)
    if vol == 0.0:
        raise ModelError("vertices are affinely dependent; the density is undefined")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[:, None] if single else x
    if X.shape[0] != Mdim:
        raise ShapeError("x dimension does not match B")
    E = edge_matrix(B)
    bary = np.linalg.solve(E, X - B[:, -1:])
    last = 1.0 - bary.sum(axis=0)
    inside = np.all(bary > tol, axis=0) & (last > tol)
    vals = np.where(inside, 1.0 / vol, 0.0)
    return float(vals[0]) if single else vals


def snr_to_sigma(A, snr_db):
    """Noise standard deviation giving the requested SNR in dB for vertices A.

    The convention is snr = E||A s||^2 / E||v||^2 with s uniform on the
    simplex and E||v||^2 = M sigma^2.  The signal power has the closed form
    (||A||_F^2 + ||A 1||^2) / (N (N+1)).
    """
    A = check_vertex_matrix(A, min_vertices=2)
    if not np.isfinite(snr_db):
        raise DomainError("snr_db must be finite")
    M, N = A.shape
    power = (np.sum(A * A) + np.sum((A @ np.ones(N)) ** 2)) / (N * (N + 1.0))
    return float(math.sqrt(power / (M * 10.0 ** (snr_db / 10.0))))


def synthesize(A0, T, sigma, seed=None, snr_db=None):
    """Draw a Dataset of T observations from the model with vertex matrix A0.

    Sources and noise come from separate child streams of the seed, so the
    same seed yields the same sources at any noise level.
    """
    A0 = check_vertex_matrix(A0, min_vertices=2)
    if not is_affinely_independent(A0):
        raise ModelError("A0 must have affinely independent columns")
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise InsufficientDataError(f"T must be a positive integer, got {T!r}")
    if not (np.isfinite(sigma) and sigma >= 0.0):
        raise DomainError(f"sigma must be finite and >= 0, got {sigma!r}")
    M, N = A0.shape
    if isinstance(seed, np.random.Generator):
        src_rng = noise_rng = seed
    else:
        ss = np.random.SeedSequence(seed)
        src_seq, noise_seq = ss.spawn(2)
        src_rng = np.random.default_rng(src_seq)
        noise_rng = np.random.default_rng(noise_seq)
    S0 = sample_dirichlet(np.ones(N), int(T), src_rng)
    Y = A0 @ S0
    if sigma > 0.0:
        Y = Y + sigma * noise_rng.standard_normal((M, int(T)))
    stored_seed = seed if isinstance(seed, (int, np.integer)) else None
    return Dataset(Y=Y, A0=A0, S0=S0, sigma=float(sigma), seed=stored_seed, snr_db=snr_db)


def _loglik_from_samples(Y, A, sigma, S):
    """Log-likelihood MC estimate reusing an explicit matrix of simplex draws."""
    M = A.shape[0]
    R = S.shape[1]
    G = A @ S  # M x R
    gg = np.sum(G * G, axis=0)
    total = 0.0
    chunk = max(1, int(4e6) // max(R, 1))
    # E_s[phi_sigma(y - A s)] under the uniform simplex law equals the
    # likelihood itself (the simplex-uniform density cancels the (N-1)!).
    log_const = -math.log(R) - M * math.log(math.sqrt(2.0 * math.pi) * sigma)
    for start in range(0, Y.shape[1], chunk):
        Yc = Y[:, start : start + chunk]
        yy = np.sum(Yc * Yc, axis=0)
        cross = Yc.T @ G
        d2 = yy[:, None] - 2.0 * cross + gg[None, :]
        total += float(np.sum(logsumexp(-d2 / (2.0 * sigma * sigma), axis=1)))
    return total + Y.shape[1] * log_const


def loglik_mc(Y, A, sigma, draws=10000, seed=None):
    """Monte Carlo estimate of the data log-likelihood under vertices A.

    Uses `draws` uniform simplex proposals shared by all observations.  The
    estimate is unbiased in the likelihood (not its log) for each point; the
    per-point values are summed over the columns of Y.
    """
    A = check_vertex_matrix(A, min_vertices=2)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != A.shape[0]:
        raise ShapeError("Y and A row dimensions disagree")
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise DomainError("loglik_mc requires sigma > 0")
    if not isinstance(draws, (int, np.integer)) or draws < 1:
        raise DomainError("draws must be a positive integer")
    S = sample_dirichlet(np.ones(A.shape[1]), int(draws), seed)
    return _loglik_from_samples(Y, A, float(sigma), S)


# ---------------------------------------------------------------------------
# serialization: CSV matrix with an M,T header line plus a JSON truth sidecar


def _format_matrix(X):
    return "\n".join(",".join("%.17g" % v for v in row) for row in X)


def _sidecar_path(path):
    return os.fspath(path) + ".meta.json"


def save_dataset(ds: Dataset, path):
    """Write the observation matrix as CSV and truth metadata as a sidecar.

    The CSV holds one observation per column: a header line ``M,T``, one line
    with their values, then M data lines of T comma-separated numbers.  Truth
    (A0, S0, sigma, seed, SNR convention) goes to ``<path>.meta.json``.
    """
    path = os.fspath(path)
    with open(path, "w") as fh:
        fh.write("M,T\n%d,%d\n" % (ds.M, ds.T))
        fh.write(_format_matrix(ds.Y))
        fh.write("\n")
    meta = {"sigma": ds.sigma, "seed": ds.seed, "snr_db": ds.snr_db,
            "snr_convention": ds.snr_convention}
    if ds.A0 is not None:
        meta["A0"] = np.asarray(ds.A0).tolist()
    if ds.S0 is not None:
        meta["S0"] = np.asarray(ds.S0).tolist()
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    """Read a dataset written by save_dataset; the sidecar is optional."""
    path = os.fspath(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "M,T":
            raise ShapeError(f"unrecognised dataset header {header!r}")
        dims = fh.readline().strip().split(",")
        if len(dims) != 2:
            raise ShapeError("dataset dimension line must hold two integers")
        M, T = int(dims[0]), int(dims[1])
        Y = np.loadtxt(fh, delimiter=",", ndmin=2)
    if Y.shape != (M, T):
        raise ShapeError(f"dataset body {Y.shape} does not match declared ({M}, {T})")
    kw = {}
    side = _sidecar_path(path)
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
        kw["sigma"] = meta.get("sigma")
        kw["seed"] = meta.get("seed")
        kw["snr_db"] = meta.get("snr_db")
        if meta.get("snr_convention"):
            kw["snr_convention"] = meta["snr_convention"]
        if meta.get("A0") is not None:
            kw["A0"] = np.asarray(meta["A0"], dtype=float)
        if meta.get("S0") is not None:
            kw["S0"] = np.asarray(meta["S0"], dtype=float)
    return Dataset(Y=Y, **kw)
