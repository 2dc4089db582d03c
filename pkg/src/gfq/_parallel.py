"""Deterministic batching of replicate ranges over a thread pool.

Workers fill disjoint slices of preallocated per-replicate arrays, so the
final reduction sees the same numbers in the same order whatever the
thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads=None):
    """Thread count from the argument, then ``GFQ_THREADS``, then 1."""
    if threads is None:
        env = os.environ.get("GFQ_THREADS")
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def run_batches(work, n_total, batch_size, threads=None):
    """Call ``work(start, stop)`` over consecutive replicate ranges."""
    ranges = [(s, min(s + batch_size, n_total)) for s in range(0, n_total, batch_size)]
    threads = resolve_threads(threads)
    if threads == 1 or len(ranges) <= 1:
        for start, stop in ranges:
            work(start, stop)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for fut in [pool.submit(work, s, e) for s, e in ranges]:
            fut.result()
