"""Order-preserving process pool helper."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_threads() -> int:
    return os.cpu_count() or 1


def pmap(fn, items, threads: int | None = None) -> list:
    """``[fn(i) for i in items]``, optionally in worker processes.

    Results come back in input order, so reductions over them are independent
    of the worker count.
    """
    items = list(items)
    threads = threads or 1
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
