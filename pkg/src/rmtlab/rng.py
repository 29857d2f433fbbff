"""Counter-based random streams.

Every random draw in the package goes through :func:`stream`, which keys a
Philox generator by ``(seed, *labels)``.  Two calls with the same key give the
same numbers regardless of how many other streams were created before, so
Monte Carlo tasks can be scheduled in any order or on any number of workers.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed, *labels):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *labels)``.

    Labels are nonnegative integers (sample index, sweep id, ...).  Seeds are
    reduced modulo 2**64.
    """
    key = [int(seed) & _MASK64] + [int(x) & _MASK64 for x in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def child_seed(seed, *labels) -> int:
    """Deterministic 64-bit seed for a sub-task labelled by ``labels``."""
    key = [int(seed) & _MASK64] + [int(x) & _MASK64 for x in labels]
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])
