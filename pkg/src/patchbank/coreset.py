"""Greedy k-center subsampling of a memory bank.

Farthest-point traversal: starting from a seed entry, repeatedly add
the entry farthest from everything selected so far.  The resulting
cover radius is at most twice the optimum for the same budget, so a
small fraction of the bank preserves its coverage of feature space
while cutting nearest-neighbor search cost roughly in proportion.

Local densities must be learned on the subsampled bank, not inherited
from the full one: the selection thins neighborhoods nonuniformly and
stale densities would misstate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bank import MemoryBank


@dataclass(frozen=True)
class CoresetSelection:
    """Row indices kept by a subsampling run, with its parameters."""

    indices: np.ndarray  # strictly increasing int64 rows into the source bank
    proportion: float
    seed_index: int

    def __post_init__(self):
        arr = np.asarray(self.indices, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("selection must keep at least one row")
        if not (np.diff(arr) > 0).all():
            raise ValueError("selection indices must be strictly increasing")
        if arr[0] < 0:
            raise ValueError("selection indices must be non-negative")
        object.__setattr__(self, "indices", arr)

    @property
    def size(self) -> int:
        return int(self.indices.size)


def target_size(n: int, proportion: float) -> int:
    """Number of rows kept from ``n`` at ``proportion``: half-up rounding
    with a floor of one."""
    if not 0.0 < proportion <= 1.0:
        raise ValueError(f"proportion must be in (0, 1], got {proportion}")
    return max(1, int(math.floor(proportion * n + 0.5)))


def greedy_kcenter(bank, proportion: float, seed_index: int = 0) -> CoresetSelection:
    """Select a k-center coreset of the bank by farthest-point traversal.

    Ties on the farthest distance go to the lowest row index, so the
    selection is a pure function of (entries, proportion, seed_index).
    """
    entries = bank.entries if isinstance(bank, MemoryBank) else np.asarray(bank)
    if entries.ndim != 2 or entries.shape[0] == 0:
        raise ValueError("bank must be a non-empty 2-D array of entries")
    n = entries.shape[0]
    if not 0 <= seed_index < n:
        raise ValueError(f"seed_index must be in [0, {n}), got {seed_index}")
    m = target_size(n, proportion)
    if m >= n:
        return CoresetSelection(np.arange(n, dtype=np.int64), proportion, seed_index)

    x = entries.astype(np.float64)
    selected = np.empty(m, dtype=np.int64)
    selected[0] = seed_index
    # squared distances are enough for argmax/min comparisons
    min_d2 = np.sum((x - x[seed_index]) ** 2, axis=1)
    for i in range(1, m):
        nxt = int(np.argmax(min_d2))  # first maximum = lowest index
        selected[i] = nxt
        d2 = np.sum((x - x[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
    selected.sort()
    return CoresetSelection(selected, proportion, seed_index)


def apply_selection(bank: MemoryBank, selection: CoresetSelection) -> MemoryBank:
    """Materialize the subsampled bank."""
    if selection.indices[-1] >= bank.size:
        raise ValueError(
            f"selection index {int(selection.indices[-1])} out of range "
            f"for a bank of {bank.size}"
        )
    return MemoryBank(bank.entries[selection.indices])


def cover_radius(entries, indices) -> float:
    """Largest distance from any entry to its nearest selected entry."""
    x = np.asarray(entries, dtype=np.float64)
    idx = np.asarray(indices, dtype=np.int64)
    centers = x[idx]
    best = np.full(x.shape[0], np.inf)
    for c in centers:
        np.minimum(best, np.sum((x - c) ** 2, axis=1), out=best)
    return float(np.sqrt(best.max()))
