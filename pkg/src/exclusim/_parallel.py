"""Replica fan-out: independent seeded jobs, deterministically collected.

Workers default to 1 (serial); set ``EXCLUSIM_WORKERS`` or pass ``workers``
to fan replicas out to a thread pool.  Results are collected by replica
index and every aggregation downstream is order-independent, so the output
bytes do not depend on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("EXCLUSIM_WORKERS", "1"))
    return max(1, workers)


def map_indexed(fn, count: int, workers: int | None = None) -> list:
    """[fn(0), ..., fn(count - 1)], optionally computed on a thread pool."""
    workers = resolve_workers(workers)
    if workers == 1 or count <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        return list(pool.map(fn, range(count)))
