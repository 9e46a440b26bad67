"""Dense linear algebra helpers and keyed random streams.

Matrices are plain float64 ``numpy.ndarray`` objects. Random streams use the
counter-based Philox generator so that child streams keyed on integers
(step index, segment index, ...) are reproducible regardless of the order in
which parallel workers request them.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

JITTER = 1e-10


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def cholesky_factor(a):
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    A single retry with ``JITTER`` added to the diagonal is attempted before
    giving up, which covers GP covariances with correlation close to one.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12 * scale):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(a + JITTER * np.eye(a.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc


def solve_spd(a, b):
    """Solve ``a @ x = b`` for symmetric positive definite ``a``."""
    b = np.asarray(b, dtype=np.float64)
    low = cholesky_factor(a)
    if b.shape[0] != low.shape[0]:
        raise ValueError(
            f"right-hand side has {b.shape[0]} rows, matrix has {low.shape[0]}")
    return scipy.linalg.cho_solve((low, True), b)


class SeededRng:
    """A single-owner normal-variate stream.

    ``key`` identifies the stream within the tree rooted at ``seed``; use
    :meth:`split` to hand independent streams to parallel workers instead of
    sharing one instance.
    """

    def __init__(self, seed, key=()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(seq))
        self.position = 0

    def split(self, *key):
        return SeededRng(self.seed, self.key + tuple(key))

    def normal(self, shape):
        shape = (int(shape),) if np.isscalar(shape) else tuple(shape)
        out = self._gen.standard_normal(shape)
        self.position += out.size
        return out

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, key={self.key}, position={self.position})"


def sample_standard_normal(rng, n):
    if n < 1:
        raise ValueError("n must be at least 1")
    return rng.normal((int(n),))
