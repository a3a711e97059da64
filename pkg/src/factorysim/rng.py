"""Deterministic RNG substreams.

Every run owns a single master seed; each consumer derives an independent
substream keyed by (purpose, index).  Keying by purpose and UE index means
adding a UE or reordering modules never perturbs the draws of existing
consumers, which the reproducibility tests rely on.
"""

from __future__ import annotations

import numpy as np

# Purpose codes. Values are part of the determinism contract: changing them
# changes every artifact produced from a given seed.
LAYOUT = 0
SHADOWING = 1
TRAFFIC = 2
TRAFFIC_SETUP = 3   # population-level draws (e.g. which UEs are aperiodic)
AGENT = 4
SCHEDULER = 5


def substream(master_seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (purpose, index) under a master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(purpose, index))
    return np.random.default_rng(ss)
