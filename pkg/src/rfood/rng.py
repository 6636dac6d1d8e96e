"""Deterministic, label-separated random streams.

Every generator is derived from ``(master_seed, stream_label, *indices)`` so
trials never share generator state and results do not depend on the order in
which trials are executed.
"""

import numpy as np

STREAMS = {
    "inputs": 0,
    "noise": 1,
    "shift": 2,
    "features": 3,
    "test_inputs": 4,
    "test_noise": 5,
    "test_shift": 6,
    "beta": 7,
    "population": 8,
}


def stream(master_seed, label, *indices):
    """Return a fresh generator for ``label`` at the given integer indices."""
    if label not in STREAMS:
        raise KeyError(f"unknown stream label {label!r}")
    key = (STREAMS[label],) + tuple(int(i) for i in indices)
    seq = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=key)
    return np.random.default_rng(seq)


def as_generator(seed):
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(seed, label):
    """Split an integer seed into a labelled child stream.

    Generators passed in directly are returned unchanged so that callers who
    manage their own state keep full control.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng()
    return stream(seed, label)
