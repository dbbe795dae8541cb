"""Seeded shot fan-out.

Shot ``i`` of a run with base seed ``s`` draws from a Philox generator
seeded with ``s + i``, so serial and threaded runs see the same numbers.
``CVD_THREADS`` caps the worker count (unset or 0 means serial).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def shot_rng(seed_base: int, shot_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed_base) + int(shot_index)))


def as_rng(seed) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return shot_rng(seed, 0)


def worker_count() -> int:
    raw = os.environ.get("CVD_THREADS", "0").strip() or "0"
    try:
        return max(0, int(raw))
    except ValueError:
        raise ValueError(f"CVD_THREADS must be an integer, got {raw!r}") from None


def map_shots(fn, n_shots: int, seed_base: int, workers: int | None = None) -> list:
    """``[fn(shot_rng(seed_base, i), i) for i in range(n_shots)]``, optionally threaded.

    Output order always follows the shot index.
    """
    workers = worker_count() if workers is None else workers

    def run(i):
        return fn(shot_rng(seed_base, i), i)

    if workers <= 1 or n_shots < 2:
        return [run(i) for i in range(n_shots)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(n_shots), chunksize=max(1, n_shots // (8 * workers))))
