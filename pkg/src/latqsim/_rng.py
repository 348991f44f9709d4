"""Seed derivation for reproducible, schedule-independent random streams."""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"negative spawn key {key}")
        return int(key)
    return zlib.crc32(str(key).encode())


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Counter-based (Philox) generator for the work item addressed by ``keys``.

    The same ``(seed, *keys)`` always yields the same stream, independent of
    the order in which work items are executed.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_part(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derived_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed for a child work item (recorded in run manifests)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_part(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))
