"""Chunked, optionally multi-process evaluation of grid scans."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

DEFAULT_CHUNK = 20000


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("BELLMAN_VERIFY_WORKERS", "1") or 1)
    return max(1, int(workers))


def map_chunks(fn, arrays, *args, workers: int | None = 1, chunk: int = DEFAULT_CHUNK):
    """Apply ``fn(*chunk_arrays, *args)`` to consecutive slices and concatenate the results.

    ``fn`` returns a tuple of arrays whose leading axis matches the chunk.
    Results keep the input order, so output is independent of ``workers``.
    """
    n = len(arrays[0])
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)] or [(0, 0)]
    pieces = [tuple(a[lo:hi] for a in arrays) for lo, hi in bounds]
    workers = resolve_workers(workers)
    if workers == 1 or len(pieces) == 1:
        outs = [fn(*p, *args) for p in pieces]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *p, *args) for p in pieces]
            outs = [f.result() for f in futures]
    return tuple(np.concatenate(parts, axis=0) for parts in zip(*outs))
