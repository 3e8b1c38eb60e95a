"""Counter-based random streams.

Every draw is a function of ``(seed, *keys)`` only, so results do not depend
on how many workers share the sampling.
"""

import numpy as np

BLOCK_SIZE = 4096


def stream(seed, *keys):
    """Philox generator keyed by the seed and an arbitrary tuple of integers."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def blocks(n_samples, block_size=BLOCK_SIZE):
    """Split ``n_samples`` into fixed ``(block_index, size)`` pieces."""
    out = []
    start = 0
    b = 0
    while start < n_samples:
        size = min(block_size, n_samples - start)
        out.append((b, size))
        start += size
        b += 1
    return out


def run_blocks(fn, n_samples, seed, workers=1, keys=(), block_size=BLOCK_SIZE):
    """Evaluate ``fn(rng, size)`` over fixed blocks and concatenate in order.

    The worker count only changes scheduling; block ``b`` always draws from
    ``stream(seed, *keys, b)``.
    """
    jobs = blocks(n_samples, block_size)

    def one(job):
        b, size = job
        return fn(stream(seed, *keys, b), size)

    if workers is None or workers <= 1 or len(jobs) == 1:
        parts = [one(j) for j in jobs]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, jobs))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)
