"""Labeled random streams derived from one root seed."""

from __future__ import annotations

import hashlib

import numpy as np


def rng_stream(root_seed: int, *labels) -> np.random.Generator:
    """Return a Generator keyed by (root_seed, *labels).

    Streams are independent of creation order, so adding a new labeled
    consumer (a diagnostic, say) never shifts the draws seen by training.
    Labels may be strings or ints; they are hashed, not Python-hash()ed,
    so the mapping is stable across processes.
    """
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    words = [int.from_bytes(h.digest()[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence(words))
