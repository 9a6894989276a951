"""Worker-count resolution and deterministic block fan-out.

Row blocks are a fixed partition independent of the worker count, and every
reduction happens within a single row, so scheduling cannot change results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "map_row_blocks", "BLOCK_ROWS"]

BLOCK_ROWS = 256


def worker_count(explicit: int | None = None) -> int:
    """Resolve the worker count: explicit argument, then POLYCBO_THREADS,
    then the machine's CPU count."""
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("POLYCBO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_row_blocks(fn, n_rows: int, workers: int, block_size: int = BLOCK_ROWS):
    """Apply fn(start, stop) over a fixed row partition, optionally threaded.

    fn must write its results into preallocated storage; return values are
    ignored.  The partition depends only on n_rows and block_size.
    """
    ranges = [(i, min(i + block_size, n_rows)) for i in range(0, n_rows, block_size)]
    if workers <= 1 or len(ranges) <= 1:
        for start, stop in ranges:
            fn(start, stop)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # consume results so worker exceptions propagate
        list(pool.map(lambda span: fn(*span), ranges))
