import numpy as np
import pytest
from scipy import stats

from simplexca.errors import AcceptanceCollapseError, DomainError, NoUpdateError
from simplexca.isa import IsaConfig, isa_fit, mcem_update, sample_posterior
from simplexca.metrics import mse
from simplexca.model import loglik_mc, sample_dirichlet, snr_to_sigma, synthesize
from simplexca.pureinit import pure_pixel_init


def test_config_validation():
    IsaConfig()
    with pytest.raises(DomainError):
        IsaConfig(proposals_per_point=0)
    with pytest.raises(DomainError):
        IsaConfig(rel_tol=2.0)
    with pytest.raises(DomainError):
        IsaConfig(collapse_fraction=1.5)


def test_sample_posterior_accepts_everything_at_huge_sigma():
    rng = np.random.default_rng(0)
    A = rng.uniform(size=(4, 3))
    y = rng.uniform(size=4)
    s = sample_posterior(y, A, sigma=1e6, proposals=400, seed=1)
    assert s.shape == (3, 400)  # the bound is tight, nothing is rejected
    assert np.max(np.abs(s.sum(axis=0) - 1.0)) <= 1e-12


def test_sample_posterior_matches_truncated_normal():
    # N=2, M=1, A=[0,1]: the posterior of s_2 is N(y, sigma^2) truncated to [0,1].
    A = np.array([[0.0, 1.0]])
    y, sigma = 0.3, 0.25
    chunks = [
        sample_posterior(np.array([y]), A, sigma, proposals=4000, seed=s)
        for s in range(8)
    ]
    s2 = np.concatenate([c[1] for c in chunks])
    assert s2.size > 5000
    a, b = (0.0 - y) / sigma, (1.0 - y) / sigma
    want_mean = stats.truncnorm.mean(a, b, loc=y, scale=sigma)
    want_std = stats.truncnorm.std(a, b, loc=y, scale=sigma)
    se = want_std / np.sqrt(s2.size)
    assert abs(s2.mean() - want_mean) <= 5 * se
    assert abs(s2.std() - want_std) <= 0.02


def test_sample_posterior_min_accepted_resamples():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    y = np.array([0.9, 0.1])
    s = sample_posterior(y, A, sigma=0.02, proposals=20, seed=3, min_accepted=30)
    assert s.shape[1] >= 30


def test_mcem_update_single_sample_identity():
    rng = np.random.default_rng(2)
    y = rng.normal(size=5)
    xi = sample_dirichlet(np.ones(3), 1, seed=0)[:, 0]
    A = mcem_update(y[:, None], [xi[:, None]])
    want = np.outer(y, xi) / (xi @ xi)
    assert np.allclose(A, want, atol=1e-12)


def test_mcem_update_recovers_vertices_from_true_weights():
    rng = np.random.default_rng(4)
    A0 = rng.uniform(size=(6, 4))
    S0 = sample_dirichlet(np.ones(4), 50, seed=1)
    Y = A0 @ S0
    batches = [S0[:, t : t + 1] for t in range(50)]
    A = mcem_update(Y, batches)
    assert np.max(np.abs(A - A0)) <= 1e-8


def test_mcem_update_skips_empty_batches():
    rng = np.random.default_rng(5)
    A0 = rng.uniform(size=(4, 3))
    S0 = sample_dirichlet(np.ones(3), 30, seed=2)
    Y = A0 @ S0
    batches = [S0[:, t : t + 1] for t in range(30)]
    batches[7] = np.zeros((3, 0))
    batches[19] = None
    A = mcem_update(Y, batches)
    assert np.max(np.abs(A - A0)) <= 1e-7
    with pytest.raises(NoUpdateError):
        mcem_update(Y, [None] * 30)


def test_isa_fit_deterministic():
    rng = np.random.default_rng(6)
    A0 = rng.uniform(size=(5, 3))
    sigma = snr_to_sigma(A0, 15.0)
    ds = synthesize(A0, 60, sigma, seed=3)
    A_init, _ = pure_pixel_init(ds.Y, 3)
    cfg = IsaConfig(proposals_per_point=100, max_iters=5, seed=11)
    r1 = isa_fit(ds.Y, cfg, A_init, sigma)
    r2 = isa_fit(ds.Y, cfg, A_init, sigma)
    assert np.array_equal(r1.a_final, r2.a_final)
    assert np.array_equal(r1.objective_trace, r2.objective_trace)
    assert r1.iterations == 5
    assert r1.extras["acceptance_rate_trace"].shape == (5,)


def test_isa_fit_raises_loglik_and_beats_init():
    rng = np.random.default_rng(7)
    A0 = rng.uniform(size=(6, 3))
    sigma = snr_to_sigma(A0, 15.0)
    ds = synthesize(A0, 150, sigma, seed=5)
    A_init, _ = pure_pixel_init(ds.Y, 3)
    cfg = IsaConfig(proposals_per_point=200, max_iters=12, seed=1)
    rep = isa_fit(ds.Y, cfg, A_init, sigma, truth_A0=A0)
    ll_init = np.median(
        [loglik_mc(ds.Y, A_init, sigma, draws=4000, seed=s) for s in range(3)]
    )
    ll_fit = np.median(
        [loglik_mc(ds.Y, rep.a_final, sigma, draws=4000, seed=s) for s in range(3)]
    )
    assert ll_fit > ll_init
    assert rep.mse_trace[-1] < mse(A0, A_init)[0]


def test_isa_fit_collapse_diagnostic_at_many_vertices():
    rng = np.random.default_rng(8)
    A0 = rng.uniform(size=(50, 20))
    sigma = snr_to_sigma(A0, 10.0)
    ds = synthesize(A0, 40, sigma, seed=9)
    A_init, _ = pure_pixel_init(ds.Y, 20)
    cfg = IsaConfig(proposals_per_point=200, max_iters=10, seed=2, collapse_patience=2)
    with pytest.raises(AcceptanceCollapseError) as err:
        isa_fit(ds.Y, cfg, A_init, sigma)
    rep = err.value.report
    assert rep is not None
    assert np.all(rep.extras["acceptance_rate_trace"] < 0.01)
