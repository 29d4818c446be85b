"""Small dense-grid operations: mean pooling, bilinear resizing, blur."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def mean_pool(data: np.ndarray, window: int) -> np.ndarray:
    """Mean-pool the trailing two axes with stride 1 and edge-replicating
    padding, so the spatial size is unchanged.  ``window`` must be odd."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"pool window must be odd and positive, got {window}")
    arr = np.asarray(data, dtype=np.float64)
    if window == 1:
        return arr.copy()
    pad = window // 2
    widths = [(0, 0)] * (arr.ndim - 2) + [(pad, pad), (pad, pad)]
    padded = np.pad(arr, widths, mode="edge")
    view = np.lib.stride_tricks.sliding_window_view(padded, (window, window), axis=(-2, -1))
    return view.mean(axis=(-2, -1))


def bilinear_resize(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinearly resample the trailing two axes to (out_h, out_w).

    Samples at half-pixel centers (corner alignment disabled), which
    preserves constants and replicates edges.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be positive, got {out_h}x{out_w}")
    arr = np.asarray(data, dtype=np.float64)
    in_h, in_w = arr.shape[-2:]
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    ty = ys - y0
    tx = xs - x0
    y0c = np.clip(y0, 0, in_h - 1).astype(np.intp)
    y1c = np.clip(y0 + 1, 0, in_h - 1).astype(np.intp)
    x0c = np.clip(x0, 0, in_w - 1).astype(np.intp)
    x1c = np.clip(x0 + 1, 0, in_w - 1).astype(np.intp)
    ty = ty.reshape(-1, 1)
    tx = tx.reshape(1, -1)
    top = arr[..., y0c[:, None], x0c[None, :]] * (1 - tx) + arr[..., y0c[:, None], x1c[None, :]] * tx
    bot = arr[..., y1c[:, None], x0c[None, :]] * (1 - tx) + arr[..., y1c[:, None], x1c[None, :]] * tx
    return top * (1 - ty) + bot * ty


def gaussian_smooth(data: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur with reflective borders; ``sigma=0`` is a no-op copy."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    arr = np.asarray(data, dtype=np.float64)
    if sigma == 0:
        return arr.copy()
    return gaussian_filter(arr, sigma=sigma)
