"""Patch and image anomaly scoring against a memory bank.

The primary scorer retrieves the single nearest bank entry and subtracts
``alpha`` times that entry's stored local density from the retrieved
distance, which normalizes scores between tight and sparse regions of
the feature space.  Scores may be negative; only their ranking matters
downstream.  Four comparison scorers are included: mean K-NN distance,
K-th-NN distance, LOF, and LDOF (canonical published definitions, with
``EPSILON`` floors on degenerate densities and denominators).  The
image score is the maximum over the patch grid, and patch grids can be
upsampled to pixel maps for localization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .bank import LocalDensityBank, MemoryBank, PatchFeatureSet
from .ops import bilinear_resize, gaussian_smooth

EPSILON = 1e-12
METHODS = ("ldknn", "knn", "kthnn", "lof", "ldof")

_METHOD_ALIASES = {
    "ldknn": "ldknn",
    "knn": "knn",
    "kthnn": "kthnn",
    "kth_nn": "kthnn",
    "kth-nn": "kthnn",
    "lof": "lof",
    "ldof": "ldof",
}

_QUERY_CHUNK = 256

AnyBank = Union[MemoryBank, LocalDensityBank]


def normalize_method(name: str) -> str:
    """Map a method name or alias to its canonical lowercase form."""
    key = str(name).strip().lower()
    if key not in _METHOD_ALIASES:
        raise ValueError(f"unknown method {name!r}: expected one of {METHODS}")
    return _METHOD_ALIASES[key]


@dataclass(frozen=True)
class ScorerConfig:
    """Scoring method plus its neighbor count and density coefficient.

    ``alpha`` is only consulted by the density-normalized method;
    ``k`` is ignored by it at inference time (retrieval is 1-NN).
    """

    method: str = "ldknn"
    k: int = 9
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "method", normalize_method(self.method))
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and non-negative, got {self.alpha}")


@dataclass(frozen=True)
class PatchScoreGrid:
    """Per-patch anomaly scores on the feature grid."""

    grid_height: int
    grid_width: int
    scores: np.ndarray  # (grid_height, grid_width) float64

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.scores, dtype=np.float64))
        if arr.shape != (self.grid_height, self.grid_width):
            raise ValueError(
                f"score grid shape {arr.shape} != "
                f"({self.grid_height}, {self.grid_width})"
            )
        if not np.isfinite(arr).all():
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", arr)


@dataclass(frozen=True)
class AnomalyResult:
    """Patch scores, their max as the image score, optional pixel map."""

    patch_scores: PatchScoreGrid
    image_score: float
    pixel_map: Optional[np.ndarray] = None

    def __post_init__(self):
        expected = float(self.patch_scores.scores.max())
        if self.image_score != expected:
            raise ValueError(
                f"image score {self.image_score} != max patch score {expected}"
            )


def _entries_of(bank: AnyBank) -> np.ndarray:
    if isinstance(bank, LocalDensityBank):
        return bank.bank.entries
    return bank.entries


def _as_queries(f, dim: int) -> np.ndarray:
    arr = np.asarray(f, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"query dim {arr.shape[-1]} != bank dim {dim}")
    if not np.isfinite(arr).all():
        raise ValueError("query vectors must be finite")
    return arr[0:1] if single else arr


def _sq_dists(queries: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, float64, clamped at zero."""
    q2 = np.einsum("ij,ij->i", queries, queries)
    e2 = np.einsum("ij,ij->i", entries, entries)
    d2 = q2[:, None] + e2[None, :] - 2.0 * (queries @ entries.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def nearest_neighbors_batch(queries, entries) -> tuple[np.ndarray, np.ndarray]:
    """Exact 1-NN for each query row; ties resolved to the lowest index.

    Returns (indices, distances).  Chunked so memory stays bounded for
    large banks.
    """
    q = np.asarray(queries, dtype=np.float64)
    e = np.asarray(entries, dtype=np.float64)
    n = q.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    for start in range(0, n, _QUERY_CHUNK):
        stop = min(start + _QUERY_CHUNK, n)
        d2 = _sq_dists(q[start:stop], e)
        best = np.argmin(d2, axis=1)  # first minimum = lowest index
        idx[start:stop] = best
        dist[start:stop] = np.sqrt(d2[np.arange(stop - start), best])
    return idx, dist


def nearest_neighbor(f, ldbank: LocalDensityBank) -> tuple[int, float, float]:
    """Nearest bank entry for one query: (index, distance, stored density)."""
    q = _as_queries(f, ldbank.dim)
    idx, dist = nearest_neighbors_batch(q, ldbank.bank.entries)
    i = int(idx[0])
    return i, float(dist[0]), float(ldbank.densities[i])


def ldknn_score_patch(f, ldbank: LocalDensityBank, alpha: float) -> float:
    """Density-normalized 1-NN score: distance minus alpha times the
    matched entry's local density.  May be negative."""
    i, dist, dens = nearest_neighbor(f, ldbank)
    return dist - alpha * dens


def _knn_dists(f, bank: AnyBank, k: int, *, max_k) -> tuple[np.ndarray, np.ndarray]:
    entries = _entries_of(bank)
    n = entries.shape[0]
    if not 1 <= k <= max_k(n):
        raise ValueError(f"k must be in [1, {max_k(n)}] for a bank of {n}, got {k}")
    q = _as_queries(f, entries.shape[1])
    d2 = _sq_dists(q, entries.astype(np.float64))
    return q, d2


def knn_score(f, bank: AnyBank, k: int) -> float:
    """Mean Euclidean distance to the K nearest bank entries."""
    _, d2 = _knn_dists(f, bank, k, max_k=lambda n: n)
    smallest = np.partition(d2, k - 1, axis=1)[:, :k]
    return float(np.sqrt(smallest).mean(axis=1)[0])


def kthnn_score(f, bank: AnyBank, k: int) -> float:
    """Euclidean distance to the K-th nearest bank entry."""
    _, d2 = _knn_dists(f, bank, k, max_k=lambda n: n)
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return float(np.sqrt(kth[0]))


def _neighbor_lists(d2: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances per row, ties to lower index."""
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def _bank_lof_stats(entries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-entry k-distance, local reachability density, and neighbor
    lists, computed within the bank with the entry itself excluded."""
    x = entries.astype(np.float64)
    d2 = _sq_dists(x, x)
    np.fill_diagonal(d2, np.inf)
    neigh = _neighbor_lists(d2, k)
    rows = np.arange(x.shape[0])[:, None]
    ndist = np.sqrt(d2[rows, neigh])
    kdist = ndist[:, k - 1]
    reach = np.maximum(kdist[neigh], ndist)
    lrd = 1.0 / np.maximum(reach.mean(axis=1), EPSILON)
    return kdist, lrd, neigh


def lof_score(f, bank: AnyBank, k: int) -> float:
    """Local outlier factor of a query against the bank.

    Reachability-based definition: the mean local reachability density
    of the query's K bank neighbors divided by the query's own.  Scores
    near 1 mean the query is as dense as its neighborhood.
    """
    q, d2 = _knn_dists(f, bank, k, max_k=lambda n: n - 1)
    entries = _entries_of(bank)
    kdist, lrd, _ = _bank_lof_stats(entries, k)
    neigh = _neighbor_lists(d2, k)
    ndist = np.sqrt(d2[np.arange(q.shape[0])[:, None], neigh])
    reach = np.maximum(kdist[neigh], ndist)
    lrd_q = 1.0 / np.maximum(reach.mean(axis=1), EPSILON)
    return float((lrd[neigh].mean(axis=1) / lrd_q)[0])


def ldof_score(f, bank: AnyBank, k: int) -> float:
    """Distance-ratio outlier factor: mean distance from the query to its
    K neighbors over the mean pairwise distance among those neighbors."""
    q, d2 = _knn_dists(f, bank, k, max_k=lambda n: n)
    entries = _entries_of(bank).astype(np.float64)
    neigh = _neighbor_lists(d2, k)
    ndist = np.sqrt(d2[np.arange(q.shape[0])[:, None], neigh])
    numer = ndist.mean(axis=1)
    pts = entries[neigh]  # (n, k, D)
    pair = np.sqrt(np.maximum(
        np.sum((pts[:, :, None, :] - pts[:, None, :, :]) ** 2, axis=-1), 0.0
    ))
    if k > 1:
        iu = np.triu_indices(k, 1)
        denom = pair[:, iu[0], iu[1]].mean(axis=1)
    else:
        denom = np.zeros_like(numer)
    return float((numer / np.maximum(denom, EPSILON))[0])


def score_patches(vectors, bank: AnyBank, cfg: ScorerConfig) -> np.ndarray:
    """Score a batch of patch vectors; returns one float64 score per row."""
    entries = _entries_of(bank)
    q = _as_queries(vectors, entries.shape[1])
    n = entries.shape[0]
    if cfg.method == "ldknn":
        if not isinstance(bank, LocalDensityBank):
            raise ValueError("ldknn scoring requires a density-annotated bank")
        idx, dist = nearest_neighbors_batch(q, entries)
        return dist - cfg.alpha * bank.densities.astype(np.float64)[idx]
    if cfg.method in ("knn", "kthnn"):
        if cfg.k > n:
            raise ValueError(f"k must be <= bank size {n}, got {cfg.k}")
        out = np.empty(q.shape[0], dtype=np.float64)
        for start in range(0, q.shape[0], _QUERY_CHUNK):
            stop = min(start + _QUERY_CHUNK, q.shape[0])
            d2 = _sq_dists(q[start:stop], entries.astype(np.float64))
            part = np.partition(d2, cfg.k - 1, axis=1)
            if cfg.method == "knn":
                out[start:stop] = np.sqrt(part[:, : cfg.k]).mean(axis=1)
            else:
                out[start:stop] = np.sqrt(part[:, cfg.k - 1])
        return out
    if cfg.method == "lof":
        if cfg.k > n - 1:
            raise ValueError(f"k must be <= {n - 1} for lof on a bank of {n}")
        kdist, lrd, _ = _bank_lof_stats(entries, cfg.k)
        d2 = _sq_dists(q, entries.astype(np.float64))
        neigh = _neighbor_lists(d2, cfg.k)
        ndist = np.sqrt(d2[np.arange(q.shape[0])[:, None], neigh])
        reach = np.maximum(kdist[neigh], ndist)
        lrd_q = 1.0 / np.maximum(reach.mean(axis=1), EPSILON)
        return lrd[neigh].mean(axis=1) / lrd_q
    # ldof
    if cfg.k > n:
        raise ValueError(f"k must be <= bank size {n}, got {cfg.k}")
    return np.array([ldof_score(row, bank, cfg.k) for row in q], dtype=np.float64)


def upsample_map(grid, out_h: int, out_w: int, smoothing_sigma: float = 0.0) -> np.ndarray:
    """Bilinearly upsample a patch score grid to (out_h, out_w) pixels,
    then optionally Gaussian-blur it (``smoothing_sigma=0`` disables)."""
    scores = grid.scores if isinstance(grid, PatchScoreGrid) else np.asarray(grid, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError(f"score grid must be 2-D, got rank {scores.ndim}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be positive, got {out_h}x{out_w}")
    if out_h < scores.shape[0] or out_w < scores.shape[1]:
        raise ValueError(
            f"output dims {out_h}x{out_w} must not be smaller than the "
            f"grid {scores.shape[0]}x{scores.shape[1]}"
        )
    resized = bilinear_resize(scores, out_h, out_w)
    return gaussian_smooth(resized, smoothing_sigma)


def score_image(
    patches: PatchFeatureSet,
    bank: AnyBank,
    cfg: ScorerConfig,
    map_size: Optional[tuple[int, int]] = None,
    smoothing_sigma: float = 0.0,
) -> AnomalyResult:
    """Score every patch of one image and take the max as the image score.

    With ``map_size=(H, W)`` a pixel-level map is attached via
    :func:`upsample_map`.
    """
    entries = _entries_of(bank)
    if patches.dim != entries.shape[1]:
        raise ValueError(f"patch dim {patches.dim} != bank dim {entries.shape[1]}")
    scores = score_patches(patches.vectors, bank, cfg)
    grid = PatchScoreGrid(
        patches.grid_height,
        patches.grid_width,
        scores.reshape(patches.grid_height, patches.grid_width),
    )
    pixel_map = None
    if map_size is not None:
        pixel_map = upsample_map(grid, map_size[0], map_size[1], smoothing_sigma)
    return AnomalyResult(grid, float(grid.scores.max()), pixel_map)
