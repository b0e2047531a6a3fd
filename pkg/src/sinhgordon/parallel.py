"""Deterministic replica-parallel execution.

Replicas are split into fixed-size chunks; chunk i always receives the i-th
spawned child of the master seed, and results are reduced in chunk order, so
the output is identical for any worker count.  Workers are threads: the heavy
kernels (matmul, exp) release the GIL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_WORKERS = "SINHGORDON_WORKERS"


def resolve_workers(explicit: int | None = None) -> int:
    if explicit is not None and explicit >= 1:
        return explicit
    env = os.environ.get(ENV_WORKERS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def as_seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def stateless_children(seed, n: int):
    """n child seed sequences derived without mutating the parent.

    Unlike ``SeedSequence.spawn`` this is a pure function, so two estimators
    handed the same seed see the same substreams (common random numbers).
    """
    ss = as_seed_sequence(seed)
    key = tuple(ss.spawn_key)
    return [np.random.SeedSequence(entropy=ss.entropy, spawn_key=key + (i,))
            for i in range(n)]


def seed_chunks(seed, total: int, chunk_size: int):
    """[(child_seed_sequence, size), ...] covering ``total`` replicas."""
    if total < 1:
        raise ValueError("total must be >= 1")
    sizes = [chunk_size] * (total // chunk_size)
    if total % chunk_size:
        sizes.append(total % chunk_size)
    return list(zip(stateless_children(seed, len(sizes)), sizes))


def map_chunks(fn, chunks, workers: int = 1):
    """Apply ``fn`` to every chunk, preserving chunk order in the result."""
    workers = resolve_workers(workers)
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
