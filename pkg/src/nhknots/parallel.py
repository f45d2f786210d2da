"""Bounded, order-preserving process pool."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "NHKNOTS_WORKERS"


def resolve_workers(workers=None) -> int:
    if workers is None or workers == "auto":
        env = os.environ.get(WORKERS_ENV)
        if env and env != "auto":
            workers = int(env)
        else:
            workers = os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def ordered_map(func, items, workers=None) -> list:
    """``[func(x) for x in items]``, possibly across processes; results keep input order."""
    items = list(items)
    n = min(resolve_workers(workers), max(len(items), 1))
    if n == 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
