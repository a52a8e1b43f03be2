"""Chunked evaluation with a reduction order that does not depend on thread count."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("MRECT_THREADS", "1")))
    except ValueError:
        return 1


def pairwise_sum(values: Sequence[float]) -> float:
    """Balanced binary-tree sum; the tree shape depends only on len(values)."""
    vals = [float(v) for v in values]
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def map_chunks(fn: Callable[[T], R], chunks: Sequence[T], threads: int | None = None) -> list[R]:
    """Evaluate ``fn`` on every chunk, returning results in chunk order."""
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))
