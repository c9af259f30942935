"""Deterministic RNG streams.

Every random draw in the library comes from a stream addressed by a master
seed plus an integer key path, so independent trials/runs can execute in any
order (or in parallel) and still reproduce bit-identically.
"""

from __future__ import annotations

import numpy as np

KeyPath = int | tuple[int, ...]


def as_key(trial: KeyPath) -> tuple[int, ...]:
    if isinstance(trial, (int, np.integer)):
        return (int(trial),)
    return tuple(int(t) for t in trial)


def stream(master_seed: int, trial: KeyPath = ()) -> np.random.Generator:
    """Generator for the stream addressed by ``(master_seed, *trial)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=as_key(trial))
    return np.random.default_rng(ss)


def child_seed(master_seed: int, *key: int) -> int:
    """Derive a 64-bit sub-seed, for handing to APIs that take plain seeds."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(key))
    state = ss.generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
