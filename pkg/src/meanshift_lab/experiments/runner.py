"""Ordered parallel execution of independent replicates."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

from ..empirical import RngSeed
from ..errors import InvalidParam

T = TypeVar("T")

THREADS_ENV = "MEANSHIFT_LAB_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InvalidParam(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise InvalidParam("thread count must be >= 1")
    return threads


def replicate_seed(seed: int, m: int, block: int = 0) -> RngSeed:
    """Stream for replicate ``m`` of sample-size block ``block``."""
    return RngSeed(seed, (block << 32) | m)


def run_replicates(fn: Callable[[int], T], count: int, threads: int | None = None) -> list[T]:
    """``[fn(0), ..., fn(count - 1)]``, in index order whatever the worker count."""
    threads = resolve_threads(threads)
    if threads == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(threads, count)) as pool:
        return list(pool.map(fn, range(count)))
