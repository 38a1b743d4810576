"""Order-preserving worker-pool map capped by ``PRNU_FORGE_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "PRNU_FORGE_THREADS"


def max_workers() -> int:
    cpus = os.cpu_count() or 1
    raw = os.environ.get(ENV_THREADS)
    if raw:
        try:
            return max(1, min(int(raw), cpus))
        except ValueError:
            pass
    return cpus


def parallel_map(fn, items) -> list:
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
