"""Seed handling.

Replica streams come from ``SeedSequence(seed, spawn_key=(chunk,))`` so a
Monte Carlo run splits into fixed chunks whose samples do not depend on how
many threads process them.
"""
import numpy as np

CHUNK = 4096


def as_rng(rng=None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def chunk_sizes(n: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def spawn(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for sub-task ``key`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def run_chunked(fn, n: int, seed: int, threads: int = 1, chunk: int = CHUNK) -> list:
    """``fn(count, rng)`` over fixed chunks; results are returned in chunk order.

    Chunk ``i`` always uses ``chunk_rng(seed, i)``, so the output does not
    depend on ``threads``.
    """
    sizes = chunk_sizes(n, chunk)
    jobs = [(c, chunk_rng(seed, i)) for i, c in enumerate(sizes)]
    if threads <= 1 or len(jobs) <= 1:
        return [fn(c, r) for c, r in jobs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))
