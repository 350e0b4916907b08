import math

import numpy as np
import pytest
from scipy.optimize import minimize

from simplexca.errors import DomainError, ModelError, ShapeError
from simplexca.geometry import (
    PolyhedralForm,
    chance_bound_pdf,
    chance_objective,
    edge_smooth_objective,
    generalized_edge_smooth,
    noiseless_svmin_objective,
    polyhedron_margins,
    polyhedron_to_simplex,
    project_to_simplex,
    project_to_simplex_batch,
    simplex_to_polyhedron,
    sisal_objective,
)
from simplexca.mathcore import log_simplex_volume, simplex_volume
from simplexca.model import loglik_mc, sample_dirichlet, synthesize


def _kkt_residual(y, A, s):
    grad = 2.0 * A.T @ (A @ s - y)
    free = s > 1e-9
    nu = -grad[free].mean()
    r_free = np.max(np.abs(grad[free] + nu)) if free.any() else 0.0
    r_fixed = max(0.0, float(-(grad[~free] + nu).min())) if (~free).any() else 0.0
    return max(r_free, r_fixed)


def test_projection_interior_point_is_exact():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))  # M >= N-1, generic
    s_true = sample_dirichlet(np.ones(4), 1, seed=1)[:, 0]
    y = A @ s_true
    s, d2 = project_to_simplex(y, A)
    assert d2 <= 1e-18
    assert np.max(np.abs(s - s_true)) <= 1e-8


def test_projection_far_point_snaps_to_vertex():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    s, d2 = project_to_simplex(np.array([5.0, -1.0]), A)
    assert np.allclose(s, [0.0, 1.0, 0.0])
    assert abs(d2 - (16.0 + 1.0)) <= 1e-12


def test_projection_matches_slsqp_oracle():
    rng = np.random.default_rng(42)
    for trial in range(20):
        N = int(rng.integers(2, 7))
        M = N - 1 + int(rng.integers(0, 4))
        A = rng.normal(size=(M, N))
        y = rng.normal(size=M) * 2.0
        s, d2 = project_to_simplex(y, A)
        assert _kkt_residual(y, A, s) <= 1e-8

        fun = lambda v: float(np.sum((y - A @ v) ** 2))
        cons = {"type": "eq", "fun": lambda v: float(v.sum() - 1.0)}
        ref = minimize(
            fun,
            np.full(N, 1.0 / N),
            bounds=[(0.0, 1.0)] * N,
            constraints=[cons],
            method="SLSQP",
            options={"maxiter": 200, "ftol": 1e-14},
        )
        assert d2 <= ref.fun + 1e-7


def test_projection_batch_agrees_with_single():
    rng = np.random.default_rng(5)
    for N in (2, 3, 6):
        A = rng.normal(size=(N + 1, N))
        Y = rng.normal(size=(N + 1, 40)) * 1.5
        S, d2 = project_to_simplex_batch(Y, A)
        assert np.max(np.abs(S.sum(axis=0) - 1.0)) <= 1e-10
        for t in range(Y.shape[1]):
            s1, d1 = project_to_simplex(Y[:, t], A)
            assert abs(d1 - d2[t]) <= 1e-8 * (1.0 + d1)
            assert np.max(np.abs(s1 - S[:, t])) <= 1e-6


def test_projection_batch_large_n_falls_back():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(12, 12))  # N=12 exceeds the enumeration limit
    Y = rng.normal(size=(12, 5))
    S, d2 = project_to_simplex_batch(Y, A)
    for t in range(5):
        assert _kkt_residual(Y[:, t], A, S[:, t]) <= 1e-8


def test_projection_validation():
    A = np.array([[0.0, 1.0]])
    with pytest.raises(ShapeError):
        project_to_simplex(np.zeros(2), A)
    with pytest.raises(DomainError):
        project_to_simplex(np.array([np.nan]), A)


def test_noiseless_svmin_objective_feasible_and_not():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    inside = np.array([[0.2, 0.3], [0.3, 0.5]])
    assert noiseless_svmin_objective(A, inside) == pytest.approx(math.log(0.5))
    outside = np.array([[0.2, 1.2], [0.3, 0.4]])
    assert noiseless_svmin_objective(A, outside) == float("inf")
    on_boundary = np.array([[0.0], [0.5]])  # on a facet: open hull excludes it
    assert noiseless_svmin_objective(A, on_boundary) == float("inf")
    with pytest.raises(ShapeError):
        noiseless_svmin_objective(np.zeros((3, 3)), np.zeros((3, 1)))


def test_noiseless_svmin_picks_true_vertices_on_grid():
    rng = np.random.default_rng(8)
    A0 = rng.normal(size=(2, 3))
    ds = synthesize(A0, 300, 0.0, seed=2)
    vals = {}
    for tau in (0.8, 0.9, 1.0, 1.2, 1.6):
        centre = A0.mean(axis=1, keepdims=True)
        cand = centre + tau * (A0 - centre)
        vals[tau] = noiseless_svmin_objective(cand, ds.Y)
    assert vals[0.8] == float("inf") and vals[0.9] == float("inf")
    finite = {k: v for k, v in vals.items() if np.isfinite(v)}
    assert set(finite) == {1.0, 1.2, 1.6}
    assert min(finite, key=finite.get) == 1.0


def test_edge_smooth_objective_projection_is_minimising():
    rng = np.random.default_rng(9)
    A = rng.normal(size=(2, 3))
    Y = rng.normal(size=(2, 30))
    base = edge_smooth_objective(A, Y, lam=0.7)
    for seed in range(5):
        S = sample_dirichlet(np.ones(3), 30, seed=seed)
        assert edge_smooth_objective(A, Y, 0.7, S=S) >= base - 1e-12
    S_bad = np.full((3, 30), 0.5)
    with pytest.raises(DomainError):
        edge_smooth_objective(A, Y, 0.7, S=S_bad)


def test_edge_smooth_value_formula():
    A = np.array([[0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    Y = np.array([[0.5, 1.0], [0.25, 0.25]])
    S = np.array([[0.5, 0.25], [0.25, 0.5], [0.25, 0.25]])
    R = Y - A @ S
    want = math.log(simplex_volume(A)) + np.sum(R * R) / (0.3 * 2)
    assert edge_smooth_objective(A, Y, 0.3, S=S) == pytest.approx(want, rel=1e-12)


def test_polyhedral_roundtrip_and_membership():
    rng = np.random.default_rng(10)
    for trial in range(20):
        N = int(rng.integers(2, 6))
        A = rng.normal(size=(N - 1, N)) * rng.uniform(0.5, 2.0)
        if simplex_volume(A) < 1e-6:
            continue
        P = simplex_to_polyhedron(A)
        back = polyhedron_to_simplex(P)
        assert np.max(np.abs(back - A)) <= 1e-10 * max(1.0, np.max(np.abs(A)))

        inside = A @ sample_dirichlet(np.ones(N), 50, seed=trial)
        m = polyhedron_margins(P, inside)
        assert np.min(m) >= -1e-9
        far = A.mean(axis=1, keepdims=True) + 10.0 * rng.normal(size=(N - 1, 20))
        S, d2 = project_to_simplex_batch(far, A)
        outside_cols = d2 > 1e-6
        m_far = polyhedron_margins(P, far)
        assert np.all(m_far.min(axis=0)[outside_cols] < 0.0)


def test_unit_simplex_polyhedral_form():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])[:, [1, 2, 0]]  # e1,e2,0
    P = simplex_to_polyhedron(A)
    assert np.allclose(P.B, np.eye(2))
    assert np.allclose(P.c, 0.0)
    assert np.allclose(P.bN, -np.ones(2))
    assert P.cN == pytest.approx(-1.0)


def test_sisal_objective_hand_case():
    # N=2 on the line: simplex [0, 1], B=-1, c=-1, bN=1, cN=0
    A = np.array([[0.0, 1.0]])
    P = simplex_to_polyhedron(A)
    Y = np.array([[-0.2, 0.5, 1.3]])
    val = sisal_objective(P, Y, lam=1.0)
    # -log|det B| = 0; violations 0.2 and 0.3 averaged over T=3
    assert val == pytest.approx((0.2 + 0.3) / 3.0, abs=1e-12)


def test_sisal_matches_volume_when_feasible():
    rng = np.random.default_rng(13)
    A = rng.normal(size=(2, 3))
    P = simplex_to_polyhedron(A)
    Y = A @ sample_dirichlet(np.ones(3), 40, seed=1)
    val = sisal_objective(P, Y, lam=0.5)
    want = -math.log(abs(np.linalg.det(P.B)))
    assert val == pytest.approx(want, abs=1e-9)
    assert val == pytest.approx(log_simplex_volume(A) + math.lgamma(3), abs=1e-9)


def test_sisal_singular_marker():
    P = PolyhedralForm(B=np.zeros((2, 2)), c=np.zeros(2), bN=np.ones(2), cN=0.0)
    assert sisal_objective(P, np.zeros((2, 3)), 1.0) == float("inf")


def test_chance_objective_facet_touch_term():
    A = np.array([[0.0, 1.0]])
    P = simplex_to_polyhedron(A)
    y = np.array([[0.0]])  # on the facet bN^T y = cN
    m = polyhedron_margins(P, y[:, 0])
    assert m[1] == pytest.approx(0.0)
    val = chance_objective(P, y, sigma=0.5)
    # worst facet is the touched one: -log Phi(0) = log 2
    assert val == pytest.approx(math.log(2.0), abs=1e-12)


def test_chance_objective_decreases_deeper_inside():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    P = simplex_to_polyhedron(A)
    near_edge = np.array([[0.02], [0.02]])
    centre = np.array([[1.0 / 3.0], [1.0 / 3.0]])
    assert chance_objective(P, centre, 0.1) < chance_objective(P, near_edge, 0.1)


def test_chance_bound_dominates_density_spot_check():
    rng = np.random.default_rng(14)
    A = rng.normal(size=(2, 3))
    if simplex_volume(A) < 1e-3:
        A = A + np.eye(2, 3)
    sigma = 0.15
    for seed in range(5):
        y = A.mean(axis=1) + rng.normal(size=2) * 0.4
        log_p = loglik_mc(y, A, sigma, draws=200000, seed=seed)
        log_bound = chance_bound_pdf(y, A, sigma, log=True)
        assert log_bound >= log_p - 0.05  # MC slack


def test_chance_bound_log_matches_plain():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    y = np.array([0.3, 0.3])
    b = chance_bound_pdf(y, A, 0.2)
    lb = chance_bound_pdf(y, A, 0.2, log=True)
    assert b == pytest.approx(math.exp(lb), rel=1e-12)


def test_generalized_edge_smooth_reductions():
    rng = np.random.default_rng(15)
    # M = N-1: affine distances vanish, any lambda reproduces edge_smooth
    A = rng.normal(size=(2, 3))
    Y = rng.normal(size=(2, 25))
    for lam in (0.2, 1.0):
        v1 = generalized_edge_smooth(A, Y, lam, sigma=0.3)
        v2 = edge_smooth_objective(A, Y, lam)
        assert v1 == pytest.approx(v2, abs=1e-10)
    # M > N-1 with lam = 2 sigma^2: the extra coefficient is exactly zero
    A_tall = rng.normal(size=(6, 3))
    Y_tall = rng.normal(size=(6, 25))
    sigma = 0.4
    v1 = generalized_edge_smooth(A_tall, Y_tall, 2.0 * sigma**2, sigma)
    v2 = edge_smooth_objective(A_tall, Y_tall, 2.0 * sigma**2)
    assert v1 == pytest.approx(v2, abs=1e-10)
    # otherwise the affine-distance term contributes for tall data
    v3 = generalized_edge_smooth(A_tall, Y_tall, 1.0, sigma=0.1)
    assert v3 != pytest.approx(edge_smooth_objective(A_tall, Y_tall, 1.0), abs=1e-6)


def test_degenerate_vertices_rejected():
    collinear = np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]])
    with pytest.raises(ModelError):
        simplex_to_polyhedron(collinear)
