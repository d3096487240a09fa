"""Deterministic process-pool map.

Work items are evaluated independently and results come back in input
order, so any reduction done by the caller sees the same sequence for every
worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

_SHARED = None


def _install(shared):
    global _SHARED
    _SHARED = shared


def _run_chunk(args):
    fn, chunk = args
    return [fn(_SHARED, item) for item in chunk]


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def pmap(fn: Callable, shared, items: Sequence, jobs: int = 1) -> list:
    """``[fn(shared, x) for x in items]``, optionally spread over processes.

    ``fn`` must be a module-level function; ``shared`` is shipped once per
    worker rather than once per item.
    """
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(shared, item) for item in items]
    jobs = min(jobs, len(items))
    size = -(-len(items) // (4 * jobs))
    chunks = [items[i : i + size] for i in range(0, len(items), size)]
    with ProcessPoolExecutor(jobs, initializer=_install, initargs=(shared,)) as ex:
        parts = list(ex.map(_run_chunk, [(fn, c) for c in chunks]))
    return [r for part in parts for r in part]
