"""Thread fan-out for independent simulations.

COSTAS_LAB_THREADS caps the worker count (default: machine parallelism).
The compiled kernels release the GIL, so threads give real concurrency.
"""

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "pmap"]


def thread_count():
    raw = os.environ.get("COSTAS_LAB_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def pmap(fn, items):
    """Ordered map over items, threaded when it can help."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
