"""Order-preserving parallel map over independent Monte Carlo tasks."""

import os
from concurrent.futures import ThreadPoolExecutor


def default_threads() -> int:
    return int(os.environ.get("RMTLAB_THREADS", "1"))


def pmap(fn, items, threads=None):
    """``list(map(fn, items))`` evaluated on a thread pool.

    Results come back in input order and every task derives its own random
    stream from its labels, so output does not depend on ``threads``.
    LAPACK calls release the GIL, which is where the time goes.
    """
    items = list(items)
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
