import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "TAUSTAT_THREADS"


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get(THREADS_ENV, 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def map_chunks(func, n_items, threads=None, chunk=64):
    """Apply ``func(start, stop) -> ndarray`` over ``range(n_items)`` in chunks.

    Results are concatenated in index order, so the output does not depend
    on the thread count as long as ``func`` is a pure function of its range.
    """
    threads = resolve_threads(threads)
    spans = [(a, min(a + chunk, n_items)) for a in range(0, n_items, chunk)]
    if threads == 1 or len(spans) == 1:
        parts = [func(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: func(*s), spans))
    return np.concatenate(parts, axis=0)
