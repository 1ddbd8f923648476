"""Worker-count handling shared by the Monte-Carlo and series code."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

ENV_WORKERS = "CTCSIM_WORKERS"
T = TypeVar("T")


def n_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        return 1


def pmap(fn: Callable[..., T], items: Sequence, workers: int | None = None) -> list[T]:
    """Ordered map; threads are enough because the heavy work is in numpy."""
    w = n_workers(workers)
    if w == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))


def chunk_streams(seed: int, total: int, chunk: int) -> list[tuple[int, np.random.Generator]]:
    """Fixed partition of ``total`` draws into chunks, each with its own spawned
    PCG64 stream. The partition does not depend on the worker count."""
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    kids = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(n, np.random.default_rng(k)) for n, k in zip(sizes, kids)]
