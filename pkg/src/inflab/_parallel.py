import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested=None):
    """Worker cap: ``requested``, else ``INFLAB_THREADS``, else the CPU count."""
    if requested is None:
        env = os.environ.get("INFLAB_THREADS")
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


def ordered_map(fn, items, workers=None):
    """``list(map(fn, items))`` on a thread pool; output order follows input."""
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
