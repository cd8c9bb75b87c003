"""Counter-based RNG streams and ordered replicate scheduling.

Every Monte Carlo replicate draws from its own Philox stream keyed by
(seed, replicate index), so results do not depend on how replicates are
scheduled across workers.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MASK64 = (1 << 64) - 1


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for one replicate, keyed by (seed, index)."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, index & _MASK64]))


def map_replicates(fn, count: int, threads: int = 1) -> list:
    """Evaluate fn(0..count-1) and return results in index order.

    With threads > 1 the calls run on a thread pool; because each replicate
    uses its own keyed stream and results are collected in index order, the
    output is identical for any worker count.
    """
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))
