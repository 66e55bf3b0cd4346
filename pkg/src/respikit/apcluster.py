"""Exemplar clustering by affinity propagation (responsibility/availability messages)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DAMPING = 0.9
MAX_ITER = 1000
CONV_ITER = 50
JITTER = 1e-12


@dataclass(frozen=True)
class ClusterAssignment:
    """Result of :func:`cluster`.

    ``exemplar_of[i]`` is the index of point ``i``'s exemplar;
    ``exemplars`` is sorted ascending and every exemplar points to itself.
    """

    exemplar_of: np.ndarray
    exemplars: tuple
    iterations: int
    converged: bool
    net_similarity: float

    @property
    def n_clusters(self) -> int:
        return len(self.exemplars)

    @property
    def labels(self) -> np.ndarray:
        """Cluster ids ``0..K-1`` numbered in exemplar index order."""
        lookup = {e: i for i, e in enumerate(self.exemplars)}
        return np.array([lookup[e] for e in self.exemplar_of], dtype=int)


def default_preference(S) -> float:
    """Median of the off-diagonal similarities."""
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    if n < 2:
        raise ValueError("default preference needs at least two points")
    return float(np.median(S[~np.eye(n, dtype=bool)]))


def negative_sq_euclidean(X) -> np.ndarray:
    """Similarity ``-||x_i - x_k||^2`` between rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.sum(X**2, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return -d


def net_similarity(S, exemplar_of) -> float:
    """Sum of point-to-exemplar similarities; exemplars contribute their preference."""
    S = np.asarray(S, dtype=np.float64)
    idx = np.asarray(exemplar_of)
    return float(S[np.arange(len(idx)), idx].sum())


def cluster(
    S,
    damping: float = DAMPING,
    max_iter: int = MAX_ITER,
    conv_iter: int = CONV_ITER,
    seed: int = 0,
) -> ClusterAssignment:
    """Affinity propagation on a dense similarity matrix.

    Parameters
    ----------
    S : array_like, shape (n, n)
        Similarities; the diagonal holds the preferences.
    damping : float in [0.5, 1)
        Weight of the previous message in each update.
    max_iter : int
        Hard cap on sweeps.
    conv_iter : int
        Stop once the exemplar set is unchanged for this many sweeps.
    seed : int
        Seed for the tie-breaking jitter added to ``S``.

    Returns
    -------
    ClusterAssignment
        ``converged`` is False when ``max_iter`` was hit first.
    """
    S = np.array(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("similarity matrix has non-finite entries")
    if not 0.5 <= damping < 1:
        raise ValueError("damping must lie in [0.5, 1)")
    n = S.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    if n == 1:
        return ClusterAssignment(np.zeros(1, dtype=int), (0,), 0, True, float(S[0, 0]))

    rng = np.random.default_rng(seed)
    tiny = np.finfo(np.float64).tiny * 100
    Sj = S + (JITTER * np.abs(S) + tiny) * rng.standard_normal((n, n))

    R = np.zeros((n, n))
    A = np.zeros((n, n))
    rows = np.arange(n)
    history = np.zeros((n, conv_iter), dtype=bool)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # responsibilities
        AS = A + Sj
        first = np.argmax(AS, axis=1)
        best = AS[rows, first]
        AS[rows, first] = -np.inf
        second = AS.max(axis=1)
        Rnew = Sj - best[:, None]
        Rnew[rows, first] = Sj[rows, first] - second
        R = damping * R + (1 - damping) * Rnew

        # availabilities
        Rp = np.maximum(R, 0)
        Rp[rows, rows] = R[rows, rows]
        col = Rp.sum(axis=0)
        Anew = col[None, :] - Rp
        diag = Anew[rows, rows].copy()
        Anew = np.minimum(Anew, 0)
        Anew[rows, rows] = diag
        A = damping * A + (1 - damping) * Anew

        E = (np.diag(A) + np.diag(R)) > 0
        history[:, it % conv_iter] = E
        if it >= conv_iter:
            stable = np.all(history == history[:, :1], axis=1)
            if stable.all() and E.any():
                converged = True
                break

    exemplars = np.flatnonzero(np.diag(A) + np.diag(R) > 0)
    if exemplars.size == 0:
        exemplars = np.array([int(np.argmax(np.diag(A) + np.diag(R)))])
        converged = False
    exemplar_of = _assign(S, exemplars)
    # refine: each cluster's exemplar becomes the member with the best total similarity
    refined = []
    for e in np.unique(exemplar_of):
        members = np.flatnonzero(exemplar_of == e)
        scores = S[np.ix_(members, members)].sum(axis=0)
        refined.append(members[np.argmax(scores)])
    exemplars = np.array(sorted(refined))
    exemplar_of = _assign(S, exemplars)
    return ClusterAssignment(
        exemplar_of=exemplar_of,
        exemplars=tuple(int(e) for e in exemplars),
        iterations=it,
        converged=converged,
        net_similarity=net_similarity(S, exemplar_of),
    )


def _assign(S, exemplars):
    exemplar_of = exemplars[np.argmax(S[:, exemplars], axis=1)]
    exemplar_of[exemplars] = exemplars
    return exemplar_of
