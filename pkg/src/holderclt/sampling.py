"""Counter-based random streams and small statistical helpers.

Replica draws are addressed by (seed, stream, replica index) through a
Philox counter, so any contiguous slice of replicas can be generated
independently of batch boundaries or worker count.  Each replica owns a
fixed number of counter blocks; generating replicas [r0, r1) advances the
counter to r0's block and draws whole blocks from there.  The result is
bit-identical however the work is chunked.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

__all__ = [
    "stream_uniforms",
    "stream_normals",
    "stream_signs",
    "parallel_map",
    "batch_mean_se",
]

_WORDS_PER_BLOCK = 4


def _blocks(words_per_replica: int) -> int:
    return -(-words_per_replica // _WORDS_PER_BLOCK)


def stream_uniforms(seed: int, stream: int, start: int, count: int, words_per_replica: int) -> np.ndarray:
    """Uniform(0,1) draws for replicas [start, start+count), shape (count, words_per_replica)."""
    if words_per_replica <= 0:
        raise ValueError("words_per_replica must be positive")
    nb = _blocks(words_per_replica)
    bg = np.random.Philox(key=[int(seed), int(stream)])
    bg.advance(int(start) * nb)
    u = np.random.Generator(bg).random(count * nb * _WORDS_PER_BLOCK)
    return u.reshape(count, nb * _WORDS_PER_BLOCK)[:, :words_per_replica]


def stream_normals(seed: int, stream: int, start: int, count: int, words_per_replica: int) -> np.ndarray:
    """Standard normal draws via the inverse cdf, one uniform word per normal.

    The ziggurat sampler consumes a variable number of words and would break
    replica addressing, hence the inverse-cdf route.
    """
    u = stream_uniforms(seed, stream, start, count, words_per_replica)
    # u == 0.0 occurs with probability 2^-53 per word; clip keeps ndtri finite
    # without disturbing determinism.
    return ndtri(np.clip(u, 1e-312, 1.0 - 1e-16))


def stream_signs(seed: int, stream: int, start: int, count: int, words_per_replica: int) -> np.ndarray:
    """Rademacher draws in {-1.0, +1.0}."""
    u = stream_uniforms(seed, stream, start, count, words_per_replica)
    return np.where(u < 0.5, -1.0, 1.0)


def parallel_map(fn, items, workers: int = 1):
    """Ordered map with an optional thread pool.

    Work items are fixed before dispatch, and results are merged in input
    order, so the output does not depend on the worker count.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def batch_mean_se(values: np.ndarray, n_batches: int = 16) -> tuple[float, float]:
    """Mean and batch-means standard error along the first axis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < n_batches:
        n_batches = max(1, n)
    edges = np.linspace(0, n, n_batches + 1).astype(int)
    means = np.array([values[a:b].mean() for a, b in zip(edges[:-1], edges[1:]) if b > a])
    mean = float(values.mean())
    if len(means) < 2:
        return mean, float("inf")
    se = float(means.std(ddof=1) / np.sqrt(len(means)))
    return mean, se
