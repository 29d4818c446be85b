"""Synthetic defect generation for self-supervised training data.

Each sample composes four stages: draw a binary shape mask (a closed
Bezier blob, a thin Bezier scar clipped to a long rectangle, a Bezier
clump eroded until it splits into pieces, or a plain rectangle
baseline), synthesize a fill patch over the shape's bounding box
(uniform noise or a crop of a donor image), choose a placement
uniformly among offsets that keep every shape pixel inside the
saliency region, and fuse by pasting or alpha-blending.

Class labels: 0 is an unmodified normal image; the three Bezier shapes
crossed with the two fills give labels 1..6; the rectangle baselines
extend the taxonomy with 7..10 when explicitly requested.

Generation is pure given (inputs, seed).  Per-sample RNG streams are
derived counter-style from (seed, sample index) so datasets are
reproducible and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .exceptions import GenerationError, PlacementError

SHAPE_KINDS = ("bezier_blob", "bezier_scar", "bezier_clump", "rect", "rect_scar")
FILL_KINDS = ("noise", "cutpaste")
FUSE_MODES = ("paste", "blend")

# Bezier shapes x fills plus the normal class
NUM_LABELS = 7
LABEL_NORMAL = 0

RETRY_BUDGET = 64
CURVE_SAMPLES = 128

_EROSION_STRUCTURE = ndimage.generate_binary_structure(2, 1)  # 3x3 cross


def label_for(shape_kind: str, fill_kind: str) -> int:
    """Class label of a (shape, fill) combination.

    Bezier kinds map to 1..6; the rectangle baselines sit outside the
    default 7-class taxonomy at 7..10.
    """
    s = SHAPE_KINDS.index(shape_kind)
    f = FILL_KINDS.index(fill_kind)
    return 1 + s * 2 + f


def _check_range(name, value, lo, hi, *, open_lo=False):
    a, b = float(value[0]), float(value[1])
    if not (np.isfinite(a) and np.isfinite(b)) or a > b:
        raise ValueError(f"{name} must be a non-empty interval, got {value}")
    if (a <= lo if open_lo else a < lo) or b > hi:
        raise ValueError(f"{name} must lie within ({lo}, {hi}], got {value}")
    return (a, b)


@dataclass(frozen=True)
class DefectConfig:
    """Parameter space for one synthesis run.

    ``shape_kind``, ``fill_kind``, and ``fuse_mode`` accept "random" to
    draw uniformly per sample (shapes draw among the Bezier kinds only;
    rectangles must be requested by name).  ``area_range`` is a fraction
    of the target image area.  ``normal_prob`` is the chance a sample is
    left unmodified with label 0.
    """

    shape_kind: str = "random"
    fill_kind: str = "random"
    fuse_mode: str = "random"
    area_range: tuple = (0.01, 0.06)
    scar_aspect_range: tuple = (2.0, 6.0)
    noise_mean: float = 128.0
    noise_fluctuation: float = 64.0
    blend_range: tuple = (0.3, 0.9)
    control_points: tuple = (4, 8)
    normal_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.shape_kind not in SHAPE_KINDS + ("random",):
            raise ValueError(f"unknown shape kind {self.shape_kind!r}")
        if self.fill_kind not in FILL_KINDS + ("random",):
            raise ValueError(f"unknown fill kind {self.fill_kind!r}")
        if self.fuse_mode not in FUSE_MODES + ("random",):
            raise ValueError(f"unknown fuse mode {self.fuse_mode!r}")
        object.__setattr__(
            self, "area_range", _check_range("area_range", self.area_range, 0.0, 1.0, open_lo=True)
        )
        object.__setattr__(
            self,
            "scar_aspect_range",
            _check_range("scar_aspect_range", self.scar_aspect_range, 1.0, math.inf),
        )
        object.__setattr__(
            self, "blend_range", _check_range("blend_range", self.blend_range, 0.0, 1.0, open_lo=True)
        )
        if not 0.0 <= self.noise_mean <= 255.0:
            raise ValueError(f"noise_mean must be in [0, 255], got {self.noise_mean}")
        if self.noise_fluctuation < 0:
            raise ValueError("noise_fluctuation must be non-negative")
        cp = (int(self.control_points[0]), int(self.control_points[1]))
        if cp[0] < 2 or cp[1] < cp[0]:
            raise ValueError(f"control_points must be a range with min >= 2, got {self.control_points}")
        object.__setattr__(self, "control_points", cp)
        if not 0.0 <= self.normal_prob <= 1.0:
            raise ValueError(f"normal_prob must be in [0, 1], got {self.normal_prob}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


def _tight_bbox(mask: np.ndarray) -> tuple:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


@dataclass(frozen=True)
class ShapeMask:
    """Binary defect shape on its canvas with a tight bounding box."""

    height: int
    width: int
    mask: np.ndarray  # (height, width) uint8 of 0/1
    bbox: tuple  # (x, y, w, h), tight around the set pixels

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.mask) != 0).astype(np.uint8)
        if m.shape != (self.height, self.width):
            raise ValueError(f"mask shape {m.shape} != ({self.height}, {self.width})")
        if not m.any():
            raise ValueError("shape mask has no set pixels")
        if tuple(self.bbox) != _tight_bbox(m):
            raise ValueError(f"bounding box {self.bbox} is not tight (expected {_tight_bbox(m)})")
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "bbox", tuple(int(v) for v in self.bbox))

    @classmethod
    def from_mask(cls, mask) -> "ShapeMask":
        m = (np.asarray(mask) != 0).astype(np.uint8)
        if m.ndim != 2:
            raise ValueError(f"mask must be 2-D, got rank {m.ndim}")
        if not m.any():
            raise ValueError("shape mask has no set pixels")
        return cls(m.shape[0], m.shape[1], m, _tight_bbox(m))

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    def cropped(self) -> np.ndarray:
        """The mask restricted to its bounding box."""
        x, y, w, h = self.bbox
        return self.mask[y : y + h, x : x + w]


@dataclass(frozen=True)
class SynthSample:
    """One synthesized image with its defect mask and class label."""

    image: np.ndarray
    mask: np.ndarray  # (H, W) uint8 of 0/1
    label: int

    def __post_init__(self):
        img = np.asarray(self.image)
        m = np.asarray(self.mask)
        if m.shape != img.shape[:2]:
            raise ValueError(f"mask shape {m.shape} != image plane {img.shape[:2]}")
        if self.label < 0:
            raise ValueError(f"label must be non-negative, got {self.label}")
        if (self.label == LABEL_NORMAL) == bool(m.any()):
            raise ValueError("mask must be nonzero exactly when the label is a defect class")


def bezier_curve_points(control, samples: int) -> np.ndarray:
    """Evaluate a Bezier curve at ``samples`` uniform parameter values.

    De Casteljau recursion, so curve(0) and curve(1) reproduce the first
    and last control points exactly.
    """
    ctrl = np.asarray(control, dtype=np.float64)
    if ctrl.ndim != 2 or ctrl.shape[0] < 2 or ctrl.shape[1] != 2:
        raise ValueError("need at least 2 control points of dimension 2")
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    t = np.linspace(0.0, 1.0, samples)[:, None, None]
    pts = np.broadcast_to(ctrl, (samples,) + ctrl.shape).copy()
    while pts.shape[1] > 1:
        pts = (1.0 - t) * pts[:, :-1] + t * pts[:, 1:]
    return pts[:, 0, :]


def _draw_polygon(points: np.ndarray, height: int, width: int) -> np.ndarray:
    img = Image.new("L", (width, height), 0)
    xy = [(float(x), float(y)) for x, y in points]
    ImageDraw.Draw(img).polygon(xy, fill=1, outline=1)
    return np.asarray(img, dtype=np.uint8)


def _draw_polyline(points: np.ndarray, height: int, width: int, widths) -> np.ndarray:
    """Rasterize a polyline; ``widths`` is one stroke width per segment run."""
    img = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(img)
    runs = np.array_split(np.arange(len(points)), len(widths))
    prev_end = None
    for run, w in zip(runs, widths):
        idx = list(run)
        if prev_end is not None:
            idx = [prev_end] + idx  # keep runs connected
        if len(idx) >= 2:
            xy = [(float(points[i][0]), float(points[i][1])) for i in idx]
            draw.line(xy, fill=1, width=int(w), joint="curve")
        prev_end = run[-1]
    # stroke ends are centered on the endpoints; make sure both pixels are set
    for p in (points[0], points[-1]):
        x, y = int(round(float(p[0]))), int(round(float(p[1])))
        if 0 <= x < width and 0 <= y < height:
            draw.point((x, y), fill=1)
    return np.asarray(img, dtype=np.uint8)


def _area_targets(cfg: DefectConfig, rng, image_shape, bounds) -> tuple:
    """Area target in pixels (fraction of the full image) plus the
    spatial caps the shape must fit, normally the saliency bounding box."""
    total = int(image_shape[0]) * int(image_shape[1])
    if bounds is None:
        bounds = image_shape
    h, w = int(bounds[0]), int(bounds[1])
    lo, hi = cfg.area_range
    target = rng.uniform(lo, hi) * total
    return h, w, total, lo, hi, target


def gen_bezier_blob(cfg: DefectConfig, rng, image_shape, bounds=None) -> ShapeMask:
    """Closed Bezier loop, interior-filled, resampled until its area
    fraction of the image lands in the configured range."""
    h, w, total, lo, hi, target = _area_targets(cfg, rng, image_shape, bounds)
    side_cap = min(h, w)
    side = int(np.clip(round(math.sqrt(target / 0.45)), 3, side_cap))
    for _ in range(RETRY_BUDGET):
        n = int(rng.integers(cfg.control_points[0], cfg.control_points[1] + 1))
        pts = rng.uniform(0, side - 1, size=(n, 2))
        center = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]), kind="stable")
        ctrl = np.concatenate([pts[order], pts[order][:1]])  # close the loop
        curve = bezier_curve_points(ctrl, CURVE_SAMPLES)
        mask = _draw_polygon(curve, side, side)
        area = int(mask.sum())
        if area and lo <= area / total <= hi:
            return ShapeMask.from_mask(mask)
        side = int(np.clip(round(side * math.sqrt(target / max(area, 1))), 3, side_cap))
    raise GenerationError(
        f"no blob with area fraction in [{lo}, {hi}] after {RETRY_BUDGET} tries"
    )


def _scar_dims(rng, target: float, lo: float, hi: float, h: int, w: int) -> tuple:
    """Long-side, short-side, and thickness for a scar stroke of roughly
    ``target`` pixels with bounding-box aspect inside [lo, hi]."""
    aspect = rng.uniform(lo, hi)
    t = int(rng.integers(1, 4))
    long_cap = max(h, w)
    rw = int(np.clip(round(target / t), 2, long_cap))
    # integer short side keeping rw/rh inside the aspect range
    rh_lo = max(1, math.ceil(rw / hi))
    rh_hi = max(1, math.floor(rw / lo))
    if rh_lo > rh_hi:
        return 0, 0, 0  # no integer short side fits; caller retries
    rh = int(np.clip(round(rw / aspect), rh_lo, rh_hi))
    return rw, rh, min(t, rh)


def gen_bezier_scar(cfg: DefectConfig, rng, image_shape, bounds=None) -> ShapeMask:
    """Thin open Bezier stroke spanning a long rectangle corner to
    corner, so the tight bounding box equals the rectangle and its
    aspect stays in the configured scar range."""
    h, w, total, lo_a, hi_a, target = _area_targets(cfg, rng, image_shape, bounds)
    lo, hi = cfg.scar_aspect_range
    for _ in range(RETRY_BUDGET):
        rw, rh, t = _scar_dims(rng, target, lo, hi, h, w)
        vertical = bool(rng.integers(0, 2))
        cap_long, cap_short = (h, w) if vertical else (w, h)
        if rw == 0 or rw > cap_long or rh > cap_short:
            continue
        n = int(rng.integers(cfg.control_points[0], cfg.control_points[1] + 1))
        ctrl = np.empty((n, 2))
        ctrl[0] = (0.0, 0.0)
        ctrl[-1] = (rw - 1.0, rh - 1.0)
        ctrl[1:-1] = rng.uniform((0, 0), (rw - 1, rh - 1), size=(n - 2, 2))
        curve = bezier_curve_points(ctrl, CURVE_SAMPLES)
        for _ in range(4):  # adapt thickness toward the area target
            mask = _draw_polyline(curve, rh, rw, [t])
            area = int(mask.sum())
            if _tight_bbox(mask) != (0, 0, rw, rh):
                break
            if lo_a <= area / total <= hi_a:
                return ShapeMask.from_mask(mask.T if vertical else mask)
            t_new = int(np.clip(round(t * target / max(area, 1)), 1, rh))
            if t_new == t:
                break
            t = t_new
    raise GenerationError(
        f"no scar with area fraction in [{lo_a}, {hi_a}] and aspect in "
        f"[{lo}, {hi}] after {RETRY_BUDGET} tries"
    )


def gen_bezier_clump(cfg: DefectConfig, rng, image_shape, bounds=None) -> ShapeMask:
    """Thick stroke of alternating widths, eroded until it splits into
    at least two connected pieces with total area in range."""
    h, w, total, lo, hi, target = _area_targets(cfg, rng, image_shape, bounds)
    side_cap = min(h, w)
    side = int(np.clip(round(math.sqrt(target / 0.2)), 8, side_cap))
    for _ in range(RETRY_BUDGET):
        n = int(rng.integers(cfg.control_points[0], cfg.control_points[1] + 1))
        ctrl = rng.uniform(0, side - 1, size=(n, 2))
        curve = bezier_curve_points(ctrl, CURVE_SAMPLES)
        thick = max(4, round(side / 3))
        n_runs = int(rng.integers(2, 5))
        # thin connectors erode away first, pinching the stroke apart
        widths = [thick if i % 2 == 0 else 1 for i in range(2 * n_runs - 1)]
        mask = _draw_polyline(curve, side, side, widths).astype(bool)
        pieces = 0
        while mask.any():
            mask = ndimage.binary_erosion(mask, structure=_EROSION_STRUCTURE)
            pieces = ndimage.label(mask, structure=_EROSION_STRUCTURE)[1]
            if pieces >= 2:
                break
        area = int(mask.sum())
        if pieces >= 2 and area and lo <= area / total <= hi:
            return ShapeMask.from_mask(mask)
        side = int(np.clip(round(side * math.sqrt(target / max(area, 1))), 8, side_cap))
    raise GenerationError(
        f"no split clump with area fraction in [{lo}, {hi}] after {RETRY_BUDGET} tries"
    )


def gen_rect_shape(cfg: DefectConfig, rng, image_shape, scar: bool = False, bounds=None) -> ShapeMask:
    """Axis-aligned filled rectangle with area in range.  The scar
    variant draws its aspect from the scar range; aspect is applied
    before integer rounding of the side lengths."""
    h, w, total, lo, hi, target = _area_targets(cfg, rng, image_shape, bounds)
    for _ in range(RETRY_BUDGET):
        if scar:
            aspect = rng.uniform(*cfg.scar_aspect_range)
        else:
            aspect = math.exp(rng.uniform(0.0, math.log(3.0)))
        rw = max(1, round(math.sqrt(target * aspect)))
        rh = max(1, round(math.sqrt(target / aspect)))
        if rng.integers(0, 2):
            rw, rh = rh, rw
        if rw > w or rh > h:
            target = rng.uniform(lo, hi) * total
            continue
        if lo <= (rw * rh) / total <= hi:
            return ShapeMask.from_mask(np.ones((rh, rw), dtype=np.uint8))
        target = rng.uniform(lo, hi) * total
    raise GenerationError(
        f"no rectangle with area fraction in [{lo}, {hi}] after {RETRY_BUDGET} tries"
    )


_SHAPE_GENERATORS = {
    "bezier_blob": gen_bezier_blob,
    "bezier_scar": gen_bezier_scar,
    "bezier_clump": gen_bezier_clump,
    "rect": lambda cfg, rng, shp, bounds: gen_rect_shape(cfg, rng, shp, scar=False, bounds=bounds),
    "rect_scar": lambda cfg, rng, shp, bounds: gen_rect_shape(cfg, rng, shp, scar=True, bounds=bounds),
}


def gen_shape(kind: str, cfg: DefectConfig, rng, image_shape, bounds=None) -> ShapeMask:
    if kind not in _SHAPE_GENERATORS:
        raise ValueError(f"unknown shape kind {kind!r}")
    return _SHAPE_GENERATORS[kind](cfg, rng, image_shape, bounds)


def gen_noise_fill(shape: ShapeMask, cfg: DefectConfig, rng, channels: int = 1) -> np.ndarray:
    """Uniform noise over the shape's bounding box, i.i.d. per pixel in
    [mean - fluctuation, mean + fluctuation], clamped to 0..255."""
    if not 0.0 <= cfg.noise_mean <= 255.0:
        raise ValueError(f"noise_mean must be in [0, 255], got {cfg.noise_mean}")
    _, _, bw, bh = shape.bbox
    size = (bh, bw) if channels == 1 else (bh, bw, channels)
    vals = rng.uniform(cfg.noise_mean - cfg.noise_fluctuation,
                       cfg.noise_mean + cfg.noise_fluctuation, size=size)
    return np.clip(np.floor(vals + 0.5), 0, 255).astype(np.uint8)


def gen_cutpaste_fill(shape: ShapeMask, donor: np.ndarray, rng) -> np.ndarray:
    """Random crop of the donor image at the shape's bounding-box size."""
    donor = np.asarray(donor)
    _, _, bw, bh = shape.bbox
    dh, dw = donor.shape[:2]
    if dh < bh or dw < bw:
        raise ValueError(f"donor {dh}x{dw} smaller than shape bounding box {bh}x{bw}")
    y = int(rng.integers(0, dh - bh + 1))
    x = int(rng.integers(0, dw - bw + 1))
    return donor[y : y + bh, x : x + bw].copy()


def place_defect(shape: ShapeMask, saliency: Optional[np.ndarray], rng,
                 image_shape=None) -> tuple:
    """Uniformly random (x, y) offset of the shape's bounding box such
    that every set shape pixel lands inside the saliency region.

    Without a saliency mask the whole frame is the region and any
    in-bounds offset is valid.  Uniformity over the feasible set comes
    from rejection sampling over the saliency bounding box; after
    ``RETRY_BUDGET`` rejected draws a placement error is raised.
    """
    _, _, bw, bh = shape.bbox
    if saliency is None:
        if image_shape is None:
            raise ValueError("image_shape is required without a saliency mask")
        h, w = int(image_shape[0]), int(image_shape[1])
        if bw > w or bh > h:
            raise PlacementError(f"shape {bh}x{bw} does not fit a {h}x{w} frame")
        x = int(rng.integers(0, w - bw + 1))
        y = int(rng.integers(0, h - bh + 1))
        return x, y
    sal = np.asarray(saliency) != 0
    if sal.ndim != 2:
        raise ValueError(f"saliency mask must be 2-D, got rank {sal.ndim}")
    if image_shape is not None and sal.shape != tuple(image_shape[:2]):
        raise ValueError(f"saliency {sal.shape} != image plane {tuple(image_shape[:2])}")
    if not sal.any():
        raise PlacementError("saliency region is empty")
    sx, sy, sw, sh = _tight_bbox(sal)
    if bw > sw or bh > sh:
        raise PlacementError(
            f"shape bounding box {bh}x{bw} exceeds the saliency region {sh}x{sw}"
        )
    pixels = shape.cropped().astype(bool)
    for _ in range(RETRY_BUDGET):
        x = int(rng.integers(sx, sx + sw - bw + 1))
        y = int(rng.integers(sy, sy + sh - bh + 1))
        if sal[y : y + bh, x : x + bw][pixels].all():
            return x, y
    raise PlacementError(f"no feasible placement after {RETRY_BUDGET} tries")


def fuse_defect(image: np.ndarray, fill: np.ndarray, shape: ShapeMask,
                offset, mode: str, beta: float = 1.0) -> np.ndarray:
    """Write the fill into the image under the placed shape mask.

    "paste" copies fill pixels; "blend" writes
    round(beta * fill + (1 - beta) * background) with round-half-up.
    Pixels outside the mask are untouched.
    """
    if mode not in FUSE_MODES:
        raise ValueError(f"unknown fuse mode {mode!r}")
    if mode == "blend" and not 0.0 < beta <= 1.0:
        raise ValueError(f"blend weight must be in (0, 1], got {beta}")
    img = np.asarray(image)
    x, y = int(offset[0]), int(offset[1])
    _, _, bw, bh = shape.bbox
    h, w = img.shape[:2]
    if x < 0 or y < 0 or x + bw > w or y + bh > h:
        raise PlacementError(
            f"offset ({x}, {y}) puts a {bh}x{bw} shape outside the {h}x{w} frame"
        )
    fill = np.asarray(fill)
    if fill.shape[:2] != (bh, bw):
        raise ValueError(f"fill patch {fill.shape[:2]} != shape bounding box {(bh, bw)}")
    if fill.ndim < img.ndim:
        fill = fill[..., None]
    pixels = shape.cropped().astype(bool)
    out = img.copy()
    region = out[y : y + bh, x : x + bw]
    if mode == "paste":
        region[pixels] = np.broadcast_to(fill, region.shape)[pixels]
    else:
        blended = np.floor(beta * fill.astype(np.float64)
                           + (1.0 - beta) * region.astype(np.float64) + 0.5)
        blended = np.clip(blended, 0, 255).astype(img.dtype)
        region[pixels] = np.broadcast_to(blended, region.shape)[pixels]
    return out


def derive_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-sample stream: same (seed, index) → same draws."""
    return np.random.default_rng([int(seed), int(index)])


def make_sample(image: np.ndarray, saliency: Optional[np.ndarray],
                cfg: DefectConfig, rng, donor: Optional[np.ndarray] = None) -> SynthSample:
    """Compose shape, fill, placement, and fusing into one labeled sample.

    The cut-paste donor defaults to the image itself when none is given.
    Draw order from ``rng`` is fixed: normal gate, shape kind, fill
    kind, fuse mode, shape, fill, blend weight, placement.
    """
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise ValueError(f"image must be 2-D or 3-D, got rank {img.ndim}")
    h, w = img.shape[:2]
    if cfg.normal_prob > 0 and rng.random() < cfg.normal_prob:
        return SynthSample(img.copy(), np.zeros((h, w), dtype=np.uint8), LABEL_NORMAL)

    shape_kind = cfg.shape_kind
    if shape_kind == "random":
        shape_kind = SHAPE_KINDS[int(rng.integers(0, 3))]  # Bezier kinds only
    fill_kind = cfg.fill_kind
    if fill_kind == "random":
        fill_kind = FILL_KINDS[int(rng.integers(0, 2))]
    fuse_mode = cfg.fuse_mode
    if fuse_mode == "random":
        fuse_mode = FUSE_MODES[int(rng.integers(0, 2))]

    bounds = None
    if saliency is not None:
        sal = np.asarray(saliency) != 0
        if not sal.any():
            raise PlacementError("saliency region is empty")
        _, _, sw, sh = _tight_bbox(sal)
        bounds = (sh, sw)
    shape = gen_shape(shape_kind, cfg, rng, (h, w), bounds)
    if fill_kind == "noise":
        channels = 1 if img.ndim == 2 else img.shape[2]
        fill = gen_noise_fill(shape, cfg, rng, channels=channels)
    else:
        fill = gen_cutpaste_fill(shape, donor if donor is not None else img, rng)
    beta = float(rng.uniform(*cfg.blend_range)) if fuse_mode == "blend" else 1.0
    x, y = place_defect(shape, saliency, rng, image_shape=(h, w))
    fused = fuse_defect(img, fill, shape, (x, y), fuse_mode, beta)

    mask = np.zeros((h, w), dtype=np.uint8)
    _, _, bw, bh = shape.bbox
    mask[y : y + bh, x : x + bw][shape.cropped().astype(bool)] = 1
    return SynthSample(fused, mask, label_for(shape_kind, fill_kind))


def generate_samples(images: Sequence[np.ndarray], saliencies, cfg: DefectConfig,
                     count: int, donors: Optional[Sequence[np.ndarray]] = None):
    """Yield ``count`` samples cycling over the images.

    Sample ``i`` uses image ``i % len(images)`` and the RNG stream
    ``derive_rng(cfg.seed, i)``; its cut-paste donor is the next image
    in the cycle (or ``donors[i % len(donors)]`` when given), so output
    bytes depend only on (images, cfg).
    """
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    n = len(images)
    if n == 0:
        raise ValueError("need at least one source image")
    for i in range(count):
        image = images[i % n]
        sal = None if saliencies is None else saliencies[i % n]
        if donors is not None and len(donors) > 0:
            donor = donors[i % len(donors)]
        else:
            donor = images[(i + 1) % n]
        yield make_sample(image, sal, cfg, derive_rng(cfg.seed, i), donor=donor)
