"""Column-block parallelism whose results never depend on the thread count.

Work is split into fixed-size blocks independent of the number of threads,
so every block sees the same inputs and array shapes in any configuration.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List

BLOCK = 64
ENV_VAR = "CLSWP_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_VAR, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def block_slices(n: int, block: int = BLOCK) -> List[slice]:
    return [slice(s, min(s + block, n)) for s in range(0, n, block)]


def map_blocks(fn: Callable[[slice], object], n: int, block: int = BLOCK) -> list:
    """Apply ``fn`` to consecutive column slices of ``range(n)``, in order."""
    slices = block_slices(n, block)
    threads = min(thread_count(), len(slices))
    if threads <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, slices))
