"""Order-preserving parallel map honouring ``RDROP_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "RDROP_THREADS"


def thread_count(threads: int | None = None) -> int:
    """Resolve a worker count; ``None`` reads ``RDROP_THREADS`` (0 = auto)."""
    if threads is None:
        raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError("thread count must be >= 0")
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly evaluated concurrently.

    Results are returned in input order, so any reduction done by the caller
    is independent of scheduling.
    """
    items = list(items)
    n = min(thread_count(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
