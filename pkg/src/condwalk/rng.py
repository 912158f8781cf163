"""Seeded random streams.

Every stochastic routine in the package draws from a stream addressed by
(master seed, label, indices...).  Streams are backed by the counter-based
Philox generator, so replicas, excursion indices and retry indices all get
independent reproducible streams that can be regenerated in any order.
"""

from __future__ import annotations

import numpy as np

# stable numeric labels for stream derivation; order must never change
_LABELS = {
    "walk": 1,
    "bm": 2,
    "hatw": 3,
    "level": 4,
    "bessel": 5,
    "excursion_w": 6,
    "excursion_s": 7,
    "kmt": 8,
    "couple": 9,
    "escape": 10,
    "misc": 11,
}


def stream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Return the Philox generator for (seed, label, indices...).

    The same address always yields the same stream, independent of how many
    other streams were created before it.
    """
    key = (_LABELS[label],) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def substream_state(seed: int, label: str, *indices: int) -> np.uint64:
    """A single 64-bit word derived from the stream address (for tiny uses)."""
    key = (_LABELS[label],) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.uint64(ss.generate_state(1, np.uint64)[0])
