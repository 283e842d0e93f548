"""Row-strip work splitting with a fixed merge order.

Workers only change how per-strip results are computed, never the order in
which they are combined, so any worker count produces bit-identical output.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def row_strips(n_rows: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, n_rows)) if n_rows else 1
    bounds = [n_rows * k // workers for k in range(workers + 1)]
    return [(bounds[k], bounds[k + 1]) for k in range(workers)
            if bounds[k + 1] > bounds[k]]


def map_strips(fn, n_rows: int, workers: int = 1) -> list:
    """Apply fn(row_start, row_stop) per strip; results returned in strip order."""
    strips = row_strips(n_rows, workers)
    if len(strips) <= 1 or workers <= 1:
        return [fn(a, b) for a, b in strips]
    with ThreadPoolExecutor(max_workers=len(strips)) as pool:
        futures = [pool.submit(fn, a, b) for a, b in strips]
        return [f.result() for f in futures]
