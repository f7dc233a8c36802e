"""Thread-count resolution and an order-preserving parallel map.

Work is always split into the same fixed-size chunks whatever the thread
count, and results are reassembled in input order, so reductions performed by
callers see identical operands in an identical order.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "ROUGHFLOW_THREADS"


def resolve_threads(threads=None):
    """Explicit value, else ``ROUGHFLOW_THREADS``, else the number of usable cores."""
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        if env:
            threads = int(env)
    if threads is None:
        try:
            threads = len(os.sched_getaffinity(0))
        except AttributeError:
            threads = os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def ordered_map(func, items, threads=None):
    """``[func(item) for item in items]`` evaluated on up to ``threads`` worker threads."""
    items = list(items)
    threads = min(resolve_threads(threads), max(1, len(items)))
    if threads == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def chunk_slices(n, chunk_size):
    """Fixed partition of ``range(n)`` into consecutive slices of ``chunk_size``."""
    return [slice(a, min(a + chunk_size, n)) for a in range(0, n, chunk_size)]
