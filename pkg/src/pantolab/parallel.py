"""Deterministic fan-out of per-path work over worker processes."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np


def chunk_bounds(n_items: int, n_chunks: int, align: int = 1) -> list[tuple[int, int]]:
    """Contiguous ``[start, stop)`` ranges whose interior boundaries are multiples of ``align``."""
    if n_items <= 0:
        return []
    blocks = -(-n_items // align)
    n_chunks = max(1, min(n_chunks, blocks))
    edges = [min(n_items, (blocks * k // n_chunks) * align) for k in range(n_chunks + 1)]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_chunks(fn: Callable[[int, int], np.ndarray], n_items: int, workers: int = 1, align: int = 1) -> np.ndarray:
    """Evaluate ``fn(start, stop)`` over a partition of ``range(n_items)`` and concatenate in order.

    ``fn`` must depend only on absolute item indices so the result is the
    same for every worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return np.concatenate([fn(a, b) for a, b in chunk_bounds(n_items, 1, align)] or [np.empty(0)])
    bounds = chunk_bounds(n_items, 4 * workers, align)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, [a for a, _ in bounds], [b for _, b in bounds]))
    return np.concatenate(parts)
