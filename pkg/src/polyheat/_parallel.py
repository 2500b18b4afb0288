"""Thread-pool map honouring the POLYHEAT_THREADS cap."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    """Number of worker threads; ``POLYHEAT_THREADS=0`` (or unset) means auto."""
    raw = os.environ.get("POLYHEAT_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def pmap(fn, items):
    """Ordered map; falls back to a plain loop for one thread or few items."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
