"""Order-preserving replica execution."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def map_replicas(fn: Callable, tasks: Sequence[tuple], threads: int = 1) -> list:
    """Run ``fn(*task)`` for every task and return results in task order.

    ``threads`` caps the number of worker processes.  Each task carries its
    own RNG stream id, so results do not depend on ``threads``.
    """
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]
