"""Pure-pixel initialisation by successive projection.

Greedily selects N data columns that are far from the span of earlier picks.
Columns are first centred and augmented with a constant row, which makes the
selection invariant to translating the data and lets affine independence act
as plain linear independence during deflation.  When the data contain all N
vertices exactly (noiseless with pure pixels), the picks recover them.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InsufficientDataError, ShapeError


def pure_pixel_init(Y, N):
    """Pick N column indices by norm-maximising successive projection.

    Parameters
    ----------
    Y : (M, T) array of observations, one per column.
    N : number of vertices to select, 1 <= N <= T.

    Returns
    -------
    A_init : (M, N) array, the selected original columns in pick order.
    indices : (N,) int array of the selected column indices.

    Ties in the norm comparisons are broken at the lowest column index.  For
    N=1 the pick is simply the column farthest from the data mean.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeError("Y must be an M x T matrix")
    if not np.all(np.isfinite(Y)):
        raise DomainError("Y contains non-finite entries")
    M, T = Y.shape
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}")
    if T < N:
        raise InsufficientDataError(f"need at least {N} columns, got {T}")

    X = Y - Y.mean(axis=1, keepdims=True)
    scale = float(np.mean(np.linalg.norm(X, axis=0)))
    if scale <= 0.0:
        scale = 1.0
    R = np.vstack([X, np.full((1, T), scale)])

    indices = []
    taken = np.zeros(T, dtype=bool)
    for _ in range(int(N)):
        norms = np.sum(R * R, axis=0)
        norms[taken] = -1.0
        pick = int(np.argmax(norms))  # argmax -> lowest index on ties
        indices.append(pick)
        taken[pick] = True
        q = R[:, pick]
        nq = np.linalg.norm(q)
        if nq > 0.0:
            q = q / nq
            R = R - np.outer(q, q @ R)

    indices = np.asarray(indices, dtype=int)
    return Y[:, indices].copy(), indices
