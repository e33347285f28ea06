"""Reproducible random streams.

All randomness in the package flows through counter-based Philox
generators. A Monte-Carlo run derives one independent stream per trial,
keyed by (master_seed, trial_index), so results do not depend on worker
count or scheduling order. Within a trial the draw order is fixed:
graph, then erasures, then peeling selection uniforms.
"""
from __future__ import annotations

import numpy as np


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence((int(master_seed), int(trial_index)))
    return np.random.Generator(np.random.Philox(ss))


def root_rng(master_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(master_seed))))


def as_generator(seed_or_rng) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return root_rng(int(seed_or_rng))


def derive_seed(master_seed: int, *tags) -> int:
    """Deterministic independent sub-seed for a named child task.

    String tags are folded to ints so (seed, "knot-term", 3) and
    (seed, "knot-trunc", 3) land in unrelated streams.
    """
    folded = tuple(
        int.from_bytes(t.encode(), "little") if isinstance(t, str) else int(t)
        for t in tags
    )
    ss = np.random.SeedSequence((int(master_seed),) + folded)
    return int(ss.generate_state(1, np.uint64)[0])
