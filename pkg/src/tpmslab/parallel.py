"""Order-preserving map over worker processes."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    env = os.environ.get("TPMSLAB_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``list(map(fn, items))``, fanned out over processes when ``workers > 1``.

    Results come back in input order whatever the completion order, so callers
    merging by parameter value stay deterministic.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
