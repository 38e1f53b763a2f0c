"""Named, independent random substreams derived from one master seed.

Every stochastic draw in the simulator (placement, shadowing, fading, cost
noise, restart permutations, ...) pulls from its own named substream so that
changing one randomization never perturbs the others.
"""

import hashlib

import numpy as np


def _tag_to_int(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    # stable across processes and runs, unlike built-in hash()
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(master_seed, *tags):
    """Return a ``numpy`` Generator for the substream named by ``tags``.

    The same (master_seed, tags) always yields the same stream; distinct
    tag tuples yield statistically independent streams.
    """
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
