"""Counter-based random streams keyed by (seed, stream) and stream-ordered parallel mapping."""
from __future__ import annotations

import concurrent.futures
import logging
from typing import Callable, List, Sequence, TypeVar

import numpy as np

from funess.features.validators import OutOfRangeError

logger = logging.getLogger(__name__)

T = TypeVar("T")

KEY_LIMIT = 2**64


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Philox generator whose key is the pair (seed, stream).

    Two calls with the same pair produce bit-identical draws, whatever thread or
    process makes them.
    """

    if not 0 <= seed < KEY_LIMIT or not 0 <= stream < KEY_LIMIT:
        raise OutOfRangeError(f"out_of_range:seed/stream={seed}/{stream}:[0,2^64)")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def chunk_streams(n: int, workers: int) -> List[range]:
    """Split streams 0..n-1 into at most ``workers`` contiguous, nearly equal ranges."""
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def map_streams(func: Callable[[range], Sequence[T]], n: int, workers: int = 1) -> List[T]:
    """Apply ``func`` to stream chunks and concatenate the results in stream order."""

    chunks = chunk_streams(n, workers)
    if len(chunks) <= 1:
        return [item for chunk in chunks for item in func(chunk)]
    logger.debug("Sampling %d streams on %d threads", n, len(chunks))
    with concurrent.futures.ThreadPoolExecutor(len(chunks), "funess-sample") as executor:
        parts = list(executor.map(func, chunks))
    return [item for part in parts for item in part]
