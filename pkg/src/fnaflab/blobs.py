"""Seeded growth of small 4-connected pixel blobs.

Used for both planted lesions and synthetic adversarial features.  Growth
is accretive: starting from the origin, random frontier cells are attached
one at a time, so every intermediate shape is 4-connected by construction.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def grow_blob(
    rng: np.random.Generator,
    n_pixels: int,
    allowed: Callable[[tuple[int, int]], bool] | None = None,
) -> tuple[tuple[int, int], ...]:
    """Grow a 4-connected blob of ``n_pixels`` offsets around (0, 0).

    ``allowed`` restricts growth (e.g. to keep a feature inside a crop);
    it must accept (0, 0).  Offsets are returned sorted for determinism.
    """
    if n_pixels < 1:
        raise ValueError(f"blob needs at least one pixel, got {n_pixels}")
    if allowed is not None and not allowed((0, 0)):
        raise ValueError("growth origin (0, 0) is not an allowed cell")
    cells = {(0, 0)}
    # Candidate list may hold duplicates/stale entries; they are discarded
    # lazily, which keeps each accretion step O(1).
    candidates: list[tuple[int, int]] = []

    def push_neighbors(cell: tuple[int, int]) -> None:
        for dr, dc in _NEIGHBORS:
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt not in cells and (allowed is None or allowed(nxt)):
                candidates.append(nxt)

    push_neighbors((0, 0))
    while len(cells) < n_pixels:
        if not candidates:
            raise ValueError(
                f"blob growth exhausted the allowed region at {len(cells)} pixels"
            )
        idx = int(rng.integers(len(candidates)))
        candidates[idx], candidates[-1] = candidates[-1], candidates[idx]
        cell = candidates.pop()
        if cell in cells:
            continue
        cells.add(cell)
        push_neighbors(cell)
    return tuple(sorted(cells))


def is_4_connected(offsets) -> bool:
    """Flood-fill check that a set of pixel offsets is one 4-connected blob."""
    cells = set(map(tuple, offsets))
    if not cells:
        return False
    stack = [next(iter(cells))]
    seen = {stack[0]}
    while stack:
        r, c = stack.pop()
        for dr, dc in _NEIGHBORS:
            nxt = (r + dr, c + dc)
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(cells)
