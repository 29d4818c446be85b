"""AUROC metrics and throughput benchmarking.

AUROC is computed from ranks (the Mann-Whitney statistic), so ties
contribute exactly 0.5 per tied positive-negative pair and the result
is invariant under any strictly increasing rescaling of the scores.
Image-level AUROC uses one score per image; pixel-level AUROC pools
every pixel of every map into one ranking, the common convention for
surface-defect localization.

Reported FPS covers the scoring engine only (patch vectors in, scores
out); feature extraction happens upstream and is not timed here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .bank import LocalDensityBank, PatchFeatureSet, learn_local_density
from .coreset import apply_selection, greedy_kcenter
from .exceptions import DataError
from .scoring import AnomalyResult, ScorerConfig, score_image


def auroc(labels, scores) -> float:
    """Area under the ROC curve of binary ``labels`` against ``scores``.

    Equals the probability that a random positive outranks a random
    negative, counting ties as one half.
    """
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError(f"labels {y.shape} and scores {s.shape} must be equal-length 1-D")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative label")
    ranks = rankdata(s)  # average ranks implement the 0.5 tie convention
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class BenchmarkRecord:
    """One row of a throughput/accuracy sweep."""

    method: str
    k: int
    alpha: float
    coreset_proportion: float
    im_auroc: float
    pi_auroc: Optional[float]
    fps: float
    bank_size: int

    def __post_init__(self):
        if not 0.0 <= self.im_auroc <= 1.0:
            raise ValueError(f"im_auroc out of [0, 1]: {self.im_auroc}")
        if self.pi_auroc is not None and not 0.0 <= self.pi_auroc <= 1.0:
            raise ValueError(f"pi_auroc out of [0, 1]: {self.pi_auroc}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    def as_row(self) -> str:
        pi = "" if self.pi_auroc is None else f"{self.pi_auroc:.6f}"
        return "\t".join([
            self.method, str(self.k), f"{self.alpha:g}",
            f"{self.coreset_proportion:g}", f"{self.im_auroc:.6f}", pi,
            f"{self.fps:.3f}", str(self.bank_size),
        ])


BENCHMARK_HEADER = "\t".join([
    "method", "k", "alpha", "proportion", "im_auroc", "pi_auroc", "fps", "bank_size",
])


def evaluate_dataset(results: Sequence[AnomalyResult], labels,
                     masks: Optional[Sequence[np.ndarray]] = None) -> tuple:
    """Image- and pixel-level AUROC over per-image results.

    ``masks`` (binary ground-truth pixel maps) are required for the
    pixel metric; pass None to compute the image metric alone, in which
    case the second element is None.  Pixel scoring needs every result
    to carry a pixel map of the matching mask shape.
    """
    y = np.asarray(labels)
    if len(results) != y.size:
        raise ValueError(f"{len(results)} results vs {y.size} labels")
    im_scores = np.array([r.image_score for r in results], dtype=np.float64)
    im = auroc(y, im_scores)
    if masks is None:
        return im, None
    if len(masks) != len(results):
        raise DataError(f"{len(masks)} masks vs {len(results)} results")
    flat_scores = []
    flat_labels = []
    for i, (r, m) in enumerate(zip(results, masks)):
        if r.pixel_map is None:
            raise DataError(f"result {i} has no pixel map; score with map output enabled")
        gt = np.asarray(m)
        if gt.shape != r.pixel_map.shape:
            raise DataError(f"mask {i} shape {gt.shape} != pixel map {r.pixel_map.shape}")
        flat_scores.append(r.pixel_map.reshape(-1))
        flat_labels.append((gt != 0).astype(np.int8).reshape(-1))
    pi = auroc(np.concatenate(flat_labels), np.concatenate(flat_scores))
    return im, pi


def _subsampled(bank: LocalDensityBank, proportion: float) -> LocalDensityBank:
    """Shrink a bank to ``proportion`` and relearn densities on the
    survivors; stale densities would describe neighborhoods the
    selection no longer has."""
    if proportion >= 1.0:
        return bank
    selection = greedy_kcenter(bank.bank, proportion)
    small = apply_selection(bank.bank, selection)
    if small.size < 2:
        raise ValueError("subsampled bank too small to learn densities on")
    return learn_local_density(small, min(bank.k_used, small.size - 1))


def benchmark_fps(bank: LocalDensityBank, query_sets: Sequence[PatchFeatureSet],
                  cfg: ScorerConfig, repetitions: int = 5,
                  coreset_proportion: float = 1.0,
                  labels=None) -> BenchmarkRecord:
    """Median wall-clock throughput of the full image-scoring path.

    Returns images/second over ``repetitions`` timed passes of the whole
    query set.  With ``labels`` given, image AUROC is computed from the
    same scores; otherwise it is reported as the chance value 0.5.
    """
    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    if len(query_sets) == 0:
        raise ValueError("need at least one query image")
    work = _subsampled(bank, coreset_proportion)
    elapsed = []
    results = []
    for _ in range(repetitions):
        start = time.perf_counter()
        results = [score_image(q, work, cfg) for q in query_sets]
        elapsed.append(time.perf_counter() - start)
    fps = len(query_sets) / float(np.median(elapsed))
    if labels is not None:
        im, _ = evaluate_dataset(results, labels)
    else:
        im = 0.5
    return BenchmarkRecord(
        method=cfg.method, k=cfg.k, alpha=cfg.alpha,
        coreset_proportion=coreset_proportion, im_auroc=im, pi_auroc=None,
        fps=fps, bank_size=work.size,
    )
