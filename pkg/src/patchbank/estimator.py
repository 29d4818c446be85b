"""Estimator-style front end over the memory bank and scorers.

Wraps bank construction, optional coreset subsampling, density
learning, and scoring in a fit/score object so the engine drops into
pipelines and grid searches that expect the standard estimator
protocol.  X is a plain 2-D array of patch feature vectors; images are
handled upstream by reshaping their patch grids to rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .bank import MemoryBank, learn_local_density
from .coreset import apply_selection, greedy_kcenter
from .scoring import METHODS, ScorerConfig, score_patches


class MemoryBankDetector(BaseEstimator):
    """Nearest-neighbor anomaly detector over a normal-only memory bank.

    fit(X) stores (a coreset of) the rows of X as the bank; for the
    density-normalized method it also learns per-entry local densities.
    anomaly_scores(X) returns higher-is-more-anomalous values, and
    score_samples(X) their negation, matching the outlier-detector
    convention that lower means more abnormal.

    Parameters
    ----------
    method : one of %(methods)s
    n_neighbors : K for density learning and the K-NN family scorers.
    alpha : density coefficient of the "ldknn" method.
    coreset_proportion : fraction of fitted rows kept by greedy
        k-center subsampling; 1.0 keeps everything.
    seed_index : starting row of the subsampling traversal.
    """ % {"methods": METHODS}

    def __init__(self, method: str = "ldknn", n_neighbors: int = 9,
                 alpha: float = 1.0, coreset_proportion: float = 1.0,
                 seed_index: int = 0):
        self.method = method
        self.n_neighbors = n_neighbors
        self.alpha = alpha
        self.coreset_proportion = coreset_proportion
        self.seed_index = seed_index

    def _config(self) -> ScorerConfig:
        return ScorerConfig(method=self.method, k=self.n_neighbors, alpha=self.alpha)

    def fit(self, X, y=None):
        """Build the bank from rows of normal patch features; y is ignored."""
        cfg = self._config()
        X = check_array(X, dtype=np.float32, ensure_min_samples=1)
        bank = MemoryBank(X)
        if not 0.0 < self.coreset_proportion <= 1.0:
            raise ValueError(
                f"coreset_proportion must be in (0, 1], got {self.coreset_proportion}"
            )
        if self.coreset_proportion < 1.0:
            selection = greedy_kcenter(bank, self.coreset_proportion, self.seed_index)
            bank = apply_selection(bank, selection)
        self.bank_ = bank
        self.densities_ = None
        if cfg.method == "ldknn":
            if bank.size < 2:
                raise ValueError("ldknn needs at least 2 bank entries to learn densities")
            ld = learn_local_density(bank, min(cfg.k, bank.size - 1))
            self.bank_ = ld
            self.densities_ = ld.densities
        self.n_features_in_ = X.shape[1]
        return self

    def anomaly_scores(self, X) -> np.ndarray:
        """Per-row anomaly scores; larger means more anomalous."""
        check_is_fitted(self, "bank_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the bank was fit with "
                f"{self.n_features_in_}"
            )
        return score_patches(X, self.bank_, self._config())

    def score_samples(self, X) -> np.ndarray:
        """Negated anomaly scores (higher = more normal)."""
        return -self.anomaly_scores(X)
