"""Thread-count resolution and order-preserving block mapping."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

ENV_THREADS = "GEOSTAT_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(ENV_THREADS, "").strip()
        if env and env != "auto":
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    return max(1, int(threads))


def block_ranges(n: int, block: int) -> list[tuple[int, int]]:
    return [(i, min(i + block, n)) for i in range(0, n, block)]


def map_blocks(fn: Callable[[int, int], T], n: int, block: int, threads: int | None = None) -> list[T]:
    """Apply ``fn(start, stop)`` to fixed-size blocks, results in block order.

    Block boundaries depend only on ``n`` and ``block``, never on the thread
    count, so results are bit-identical however many workers run.
    """
    ranges = block_ranges(n, block)
    workers = min(resolve_threads(threads), len(ranges))
    if workers <= 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
