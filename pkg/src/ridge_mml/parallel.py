"""Order-preserving parallel map capped by ``RIDGE_MML_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "RIDGE_MML_THREADS"


def max_workers() -> int:
    raw = os.environ.get(ENV_VAR, "")
    try:
        value = int(raw)
    except ValueError:
        value = os.cpu_count() or 1
    return max(1, value)


def pmap(fn, items, workers=None):
    """Apply ``fn`` to every item; results come back in input order."""
    items = list(items)
    workers = max_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
