"""Shared utility functions.

This module provides:
- Environment variable names
- A small thread-pool map used for independent per-node / per-patch work
- Timing of named stages for diagnostics
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, TypeVar

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ENV_OUTPUT_DIR = "IMPUTE_OUTPUT_DIR"
ENV_MAX_WORKERS = "IMPUTE_MAX_WORKERS"
ENV_LOG_LEVEL = "IMPUTE_LOG_LEVEL"


def max_workers() -> int:
    """Worker count for thread pools.

    Reads IMPUTE_MAX_WORKERS; defaults to min(8, cpu_count). Invalid values
    fall back to the default with a warning.
    """
    default = min(8, os.cpu_count() or 1)
    raw = os.getenv(ENV_MAX_WORKERS, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        LOGGER.warning("Ignoring non-integer %s=%r", ENV_MAX_WORKERS, raw)
        return default
    return max(1, value)


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], workers: int | None = None
) -> list[R]:
    """Apply ``func`` to every item on a thread pool, preserving order.

    Exceptions raised by ``func`` propagate to the caller (the first one in
    input order wins). With one worker, or one item, runs inline.

    Args:
        func: Pure function of one item
        items: Inputs; consumed eagerly
        workers: Pool size (default: max_workers())

    Returns:
        Results in input order
    """
    items = list(items)
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


@contextmanager
def timed(stage: str, timings: dict[str, float] | None = None) -> Iterator[None]:
    """Log and optionally record the wall time of a named stage."""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        LOGGER.debug("Stage %s took %.3fs", stage, elapsed)
        if timings is not None:
            timings[stage] = elapsed
