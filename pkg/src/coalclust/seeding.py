"""Seed derivation.

Every random stream is derived from one master seed plus a tuple of integer
keys, e.g. ``(replicate,)``, ``(iteration,)`` or ``(STAGE, k)``. The same keys
always give the same stream, regardless of execution order, so serial and
process-parallel runs agree bit for bit.
"""

import numpy as np

# key namespaces, kept distinct so streams never collide
REPLICATE = 0
ITERATION = 1
STAGE = 2
HYPER = 3
PRIOR_TREE = 4


def derive_seed(seed, *keys):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def derive_rng(seed, *keys):
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    )
