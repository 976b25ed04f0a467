"""Order-preserving chunked map over path indices.

Chunk boundaries depend only on ``n_items`` and ``chunk_size``, never on the
worker count, and results are returned in chunk order.  Combined with per-path
RNG streams this makes every reduction bit-identical for any ``threads``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

R = TypeVar("R")

# Keeps a chunk's float64 block near 16 MB.
_TARGET_CELLS = 1 << 21


def chunk_size_for(n_steps: int) -> int:
    return max(8, min(1024, _TARGET_CELLS // (n_steps + 1)))


def chunk_bounds(n_items: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(i, min(i + chunk_size, n_items)) for i in range(0, n_items, chunk_size)]


def default_threads() -> int:
    return os.cpu_count() or 1


def map_chunks(fn: Callable[[int, int], R], n_items: int, chunk_size: int, threads: int | None = None) -> list[R]:
    bounds = chunk_bounds(n_items, chunk_size)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
