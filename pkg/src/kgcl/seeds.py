"""Deterministic RNG stream derivation.

One master seed per experiment is split into named substreams so that the
different consumers of randomness (embedding init, partitioning, per-task
shuffling and negative sampling, the importance-estimation pass, replay
selection) never share generator state.  A stream is derived as
``SeedSequence((master_seed, stream_id, *indices))``, which is stable across
processes and platforms for a fixed numpy version.
"""

from __future__ import annotations

import numpy as np

# Fixed stream identifiers.  Appending new names is fine; renumbering existing
# ones silently changes every experiment, so never do that.
STREAMS = {
    "init": 0,
    "partition": 1,
    "train": 2,  # per task; split again inside the training loop
    "fisher": 3,  # per task
    "replay": 4,  # per task
}


def substream(master_seed: int, name: str, *indices: int) -> np.random.SeedSequence:
    """Seed material for the named stream, optionally indexed (e.g. per task)."""
    if name not in STREAMS:
        raise KeyError(f"unknown rng stream {name!r}; known: {sorted(STREAMS)}")
    entropy = (int(master_seed), STREAMS[name]) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(entropy)


def make_rng(master_seed: int, name: str, *indices: int) -> np.random.Generator:
    """Fresh PCG64 generator on the named substream."""
    return np.random.Generator(np.random.PCG64(substream(master_seed, name, *indices)))
