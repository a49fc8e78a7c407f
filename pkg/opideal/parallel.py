import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

__all__ = ['THREADS_ENV', 'resolve_threads', 'parallel_map', 'child_seeds']

logger = logging.getLogger(__name__)

THREADS_ENV = "OPIDEAL_THREADS"

T = TypeVar('T')
R = TypeVar('R')


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.getenv(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    if threads is None or threads < 1:
        return 1
    return threads


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Map ``fn`` over ``items`` keeping input order, whatever the thread count."""
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def child_seeds(seed, count: int) -> List[np.random.SeedSequence]:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(count)
