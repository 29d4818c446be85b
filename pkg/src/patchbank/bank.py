"""Patch-feature aggregation, the memory bank, and per-entry local density.

Normal images are represented by a bank of patch-level feature vectors.
Two backbone hierarchies are mean-pooled, the coarser one is upsampled
to the finer grid, and the channels are concatenated, so each grid cell
becomes one D-dimensional patch vector with D equal to the sum of the
two channel counts.  Each bank entry additionally learns a local
density: the mean Euclidean distance to its K nearest other entries.
Dense neighborhoods give small distances.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, FormatError
from .ops import bilinear_resize, mean_pool
from .tensor_io import FeatureTensor, _is_pathlike, _read_exact, read_tensor, write_tensor

# Queries and entries are stored float32; distance math runs in float64.
_CHUNK_ROWS = 256


@dataclass(frozen=True)
class PatchFeatureSet:
    """An Ḣ×Ẇ grid of D-dimensional patch vectors for one image."""

    grid_height: int
    grid_width: int
    vectors: np.ndarray  # (grid_height * grid_width, D) float32, row-major

    def __post_init__(self):
        if self.grid_height < 1 or self.grid_width < 1:
            raise ValueError(
                f"grid dims must be positive, got {self.grid_height}x{self.grid_width}"
            )
        arr = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float32))
        if arr.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got rank {arr.ndim}")
        if arr.shape[0] != self.grid_height * self.grid_width:
            raise ValueError(
                f"row count {arr.shape[0]} != grid size "
                f"{self.grid_height}x{self.grid_width}"
            )
        if not np.isfinite(arr).all():
            raise DataError("patch vectors contain non-finite values")
        object.__setattr__(self, "vectors", arr)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class MemoryBank:
    """Immutable N×D dictionary of normal patch vectors."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.entries, dtype=np.float32))
        if arr.ndim != 2:
            raise ValueError(f"bank entries must be 2-D, got rank {arr.ndim}")
        if arr.shape[0] < 1:
            raise ValueError("bank must contain at least one entry")
        if not np.isfinite(arr).all():
            raise DataError("bank entries contain non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class LocalDensityBank:
    """Memory bank whose entries carry their learned local density."""

    bank: MemoryBank
    densities: np.ndarray  # (N,) float32, >= 0
    k_used: int

    def __post_init__(self):
        dens = np.ascontiguousarray(np.asarray(self.densities, dtype=np.float32))
        if dens.ndim != 1 or dens.shape[0] != self.bank.size:
            raise DataError(
                f"density length {dens.shape} inconsistent with bank size {self.bank.size}"
            )
        if not np.isfinite(dens).all() or (dens < 0).any():
            raise DataError("densities must be finite and non-negative")
        if not 1 <= self.k_used < self.bank.size:
            raise ValueError(
                f"k_used must be in [1, {self.bank.size - 1}], got {self.k_used}"
            )
        dens.setflags(write=False)
        object.__setattr__(self, "densities", dens)

    @property
    def size(self) -> int:
        return self.bank.size

    @property
    def dim(self) -> int:
        return self.bank.dim


def aggregate_hierarchies(
    phi2: FeatureTensor, phi3: FeatureTensor, pool_window: int = 3
) -> PatchFeatureSet:
    """Fuse two hierarchy tensors into one grid of patch vectors.

    Both tensors are mean-pooled (stride 1, edge padding) to widen the
    receptive field, the coarser tensor is bilinearly upsampled to the
    finer spatial size, and channels are concatenated.  The output grid
    equals ``phi2``'s H×W and the vector dim equals the channel sum.
    """
    if phi3.height > phi2.height or phi3.width > phi2.width:
        raise ValueError(
            f"second tensor ({phi3.height}x{phi3.width}) must not exceed the "
            f"first ({phi2.height}x{phi2.width}) spatially"
        )
    pooled2 = mean_pool(phi2.data, pool_window)
    pooled3 = mean_pool(phi3.data, pool_window)
    up3 = bilinear_resize(pooled3, phi2.height, phi2.width)
    stacked = np.concatenate([pooled2, up3], axis=0)  # (C2+C3, H, W)
    vectors = stacked.transpose(1, 2, 0).reshape(phi2.height * phi2.width, -1)
    return PatchFeatureSet(phi2.height, phi2.width, vectors.astype(np.float32))


def build_memory_bank(sets) -> MemoryBank:
    """Concatenate patch vectors of many images, image-major then row-major."""
    sets = list(sets)
    if not sets:
        raise ValueError("cannot build a memory bank from zero feature sets")
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise ValueError(f"feature sets disagree on vector dim: {sorted(dims)}")
    return MemoryBank(np.vstack([s.vectors for s in sets]))


def learn_local_density(bank: MemoryBank, k: int) -> LocalDensityBank:
    """Attach to each entry the mean distance to its K nearest other entries.

    The entry itself is excluded from its neighbor search; duplicates of
    it are not.  Runs exact brute-force search in float64, chunked over
    entries.
    """
    n = bank.size
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}] for a bank of {n}, got {k}")
    x = bank.entries.astype(np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    densities = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf  # self out
        knn = np.partition(d2, k - 1, axis=1)[:, :k]
        densities[start:stop] = np.sqrt(knn).mean(axis=1)
    return LocalDensityBank(bank, densities.astype(np.float32), k)


def save_memory_bank(bank: MemoryBank, sink) -> None:
    """Write a plain bank as a single N×D tensor."""
    write_tensor(bank.entries, sink)


def load_memory_bank(source) -> MemoryBank:
    """Read the leading N×D tensor of a bank file (densities, if any,
    are ignored)."""
    arr = read_tensor(source)
    if arr.ndim != 2:
        raise FormatError(f"bank file must hold a rank-2 tensor, got rank {arr.ndim}")
    return MemoryBank(arr)


def save_bank(ldbank: LocalDensityBank, sink) -> None:
    """Write entries, densities, and k back to back in one file."""
    if _is_pathlike(sink):
        with open(sink, "wb") as fh:
            save_bank(ldbank, fh)
        return
    write_tensor(ldbank.bank.entries, sink)
    write_tensor(ldbank.densities, sink)
    sink.write(struct.pack("<I", ldbank.k_used))


def load_bank(source) -> LocalDensityBank:
    """Read a density-annotated bank written by :func:`save_bank`."""
    if _is_pathlike(source):
        with open(source, "rb") as fh:
            return load_bank(fh)
    entries = read_tensor(source)
    if entries.ndim != 2:
        raise FormatError(f"bank file must hold a rank-2 tensor, got rank {entries.ndim}")
    densities = read_tensor(source)
    if densities.ndim != 1:
        raise FormatError(f"density tensor must be rank 1, got rank {densities.ndim}")
    if densities.shape[0] != entries.shape[0]:
        raise DataError(
            f"density length {densities.shape[0]} != bank size {entries.shape[0]}"
        )
    (k_used,) = struct.unpack("<I", _read_exact(source, 4, "bank trailer"))
    return LocalDensityBank(MemoryBank(entries), densities, k_used)
