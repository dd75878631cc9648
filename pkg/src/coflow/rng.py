"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
master seed and a tuple of integer stream ids, e.g. ``(FLOW, replica, step)``.
Draws for particle ``j`` are the ``j``-th variates of that stream, so results
depend only on ``(seed, ids)`` and never on how work is split across workers.
"""

from __future__ import annotations

import os

import numpy as np

# stream families; the first spawn-key component keeps families disjoint
FLOW = 1
FLOW_BATCH = 2
NPOINT = 3
MISC = 4

BLOCK = 1000  # replicas per batch stream; fixed so results do not depend on COFLOW_THREADS


def stream(seed: int, *ids: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in ids))
    return np.random.Generator(np.random.Philox(ss))


def normals(seed: int, ids: tuple[int, ...], shape) -> np.ndarray:
    return stream(seed, *ids).standard_normal(shape)


def blocks(n: int, block: int = BLOCK) -> list[tuple[int, int, int]]:
    """Split ``n`` replicas into ``(block_id, start, stop)`` chunks."""
    return [(b, s, min(s + block, n)) for b, s in enumerate(range(0, n, block))]


def n_threads(default: int = 1) -> int:
    raw = os.environ.get("COFLOW_THREADS")
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"COFLOW_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def map_blocks(fn, items, threads: int | None = None) -> list:
    """Apply ``fn`` to each item, preserving order; optionally on a thread pool."""
    threads = n_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def derive_seed(seed: int, *ids: int) -> int:
    """An independent 63-bit seed for a named sub-experiment."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in ids)).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))
