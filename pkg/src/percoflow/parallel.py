"""Fixed-size trial blocks dispatched to a thread pool.

Block boundaries depend only on the trial count and block size, and results
come back in block order, so the reduction is identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def blocks(n_items: int, block_size: int) -> list[tuple[int, int]]:
    block_size = max(1, int(block_size))
    return [(s, min(s + block_size, n_items)) for s in range(0, n_items, block_size)]


def map_blocks(fn: Callable[[int, int], T], n_items: int, block_size: int,
               workers: int = 1) -> list[T]:
    spans = blocks(n_items, block_size)
    if workers <= 1 or len(spans) <= 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))
