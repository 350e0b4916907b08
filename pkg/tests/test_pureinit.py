import numpy as np
import pytest

from simplexca.errors import DomainError, InsufficientDataError
from simplexca.model import sample_dirichlet
from simplexca.pureinit import pure_pixel_init


def _planted_instance(M=7, N=4, T=60, seed=0):
    rng = np.random.default_rng(seed)
    A0 = rng.uniform(size=(M, N))
    S = sample_dirichlet(np.ones(N), T, seed=seed + 1)
    slots = rng.choice(T, size=N, replace=False)
    for j, t in enumerate(slots):
        e = np.zeros(N)
        e[j] = 1.0
        S[:, t] = e
    return A0, A0 @ S, np.sort(slots)


def test_recovers_planted_vertices_exactly():
    for seed in range(5):
        A0, Y, slots = _planted_instance(seed=seed)
        A_init, idx = pure_pixel_init(Y, 4)
        assert np.array_equal(np.sort(idx), slots)
        # picked columns are the vertices, up to order
        diff = A_init[:, None, :] - A0[:, :, None]
        errs = np.sqrt(np.sum(diff * diff, axis=0))
        assert np.max(np.min(errs, axis=0)) <= 1e-12


def test_translation_invariance():
    A0, Y, _ = _planted_instance(seed=11)
    d = np.full((Y.shape[0], 1), 37.5)
    _, idx1 = pure_pixel_init(Y, 4)
    _, idx2 = pure_pixel_init(Y + d, 4)
    assert np.array_equal(idx1, idx2)


def test_column_permutation_equivariance():
    A0, Y, _ = _planted_instance(seed=2)
    rng = np.random.default_rng(3)
    perm = rng.permutation(Y.shape[1])
    _, idx = pure_pixel_init(Y, 4)
    _, idx_p = pure_pixel_init(Y[:, perm], 4)
    inv = np.argsort(perm)
    assert np.array_equal(np.sort(inv[idx]), np.sort(idx_p))


def test_tie_break_lowest_index():
    v1 = np.array([10.0, 0.0])
    v2 = np.array([0.0, 8.0])
    filler = np.array([3.0, 3.0])
    Y = np.stack([filler, v1, filler, v1, v2], axis=1)
    _, idx = pure_pixel_init(Y, 2)
    assert 1 in idx and 3 not in idx  # duplicate column loses to its first copy


def test_single_vertex_picks_farthest_from_mean():
    Y = np.array([[0.0, 1.0, 10.0, 2.0]])
    _, idx = pure_pixel_init(Y, 1)
    assert idx.tolist() == [2]


def test_validation():
    with pytest.raises(InsufficientDataError):
        pure_pixel_init(np.zeros((3, 2)), 3)
    with pytest.raises(DomainError):
        pure_pixel_init(np.zeros((3, 5)), 0)
    with pytest.raises(DomainError):
        pure_pixel_init(np.array([[np.nan, 1.0]]), 1)
