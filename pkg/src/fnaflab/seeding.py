"""Deterministic seed derivation.

One top-level seed drives every random decision in a run.  Sub-seeds are
derived by hashing the root seed together with string labels, so adding a
new consumer never shifts the streams of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, *labels: object) -> int:
    """Derive a 64-bit sub-seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(root_seed: int, *labels: object) -> np.random.Generator:
    """A fresh generator seeded from ``derive_seed(root_seed, *labels)``."""
    return np.random.default_rng(derive_seed(root_seed, *labels))
