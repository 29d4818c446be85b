"""Feature dumping: one tensor file per image per hierarchy.

For every manifest image the tapped backbone runs once at a fixed
input size and each requested hierarchy's activation block is written
to ``<image-stem>.h<level>.rebf`` in the output directory.  Unreadable
images are skipped with a logged warning and counted in the returned
summary instead of aborting the batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import ExtractorConfig, build_backbone
from .exceptions import DataError
from .formats import read_manifest, resolve_path, write_tensor

log = logging.getLogger("featex")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def load_image_tensor(path, size: int) -> torch.Tensor:
    """Decode, resize to ``size``x``size``, and normalize to a (3,S,S) tensor."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - np.asarray(IMAGENET_MEAN, np.float32)) / np.asarray(
        IMAGENET_STD, np.float32
    )
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))


@dataclass(frozen=True)
class ExtractSummary:
    """Outcome counts: images processed, files written, images skipped."""

    images: int
    files: int
    skipped: int


def extract_features(manifest, cfg: ExtractorConfig, out_dir) -> ExtractSummary:
    """Dump hierarchy tensors for every readable image in the manifest.

    Output files are named after the image stem, so two manifest rows
    sharing a stem overwrite each other.  Inference runs single-image
    with deterministic kernels: the same input bytes always produce
    the same output bytes.
    """
    entries = read_manifest(manifest)
    base_dir = Path(manifest).parent
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.use_deterministic_algorithms(True)
    model = build_backbone(cfg)
    images = files = skipped = 0
    with torch.no_grad():
        for entry in entries:
            path = resolve_path(base_dir, entry.image_path)
            try:
                x = load_image_tensor(path, cfg.input_size)
            except OSError as exc:
                log.warning("skipping unreadable image %s: %s", path, exc)
                skipped += 1
                continue
            maps = model.hierarchy_maps(x.unsqueeze(0), cfg.hierarchies)
            stem = Path(entry.image_path).stem
            for level in cfg.hierarchies:
                write_tensor(maps[level][0].numpy(), out / f"{stem}.h{level}.rebf")
                files += 1
            images += 1
    if files == 0:
        raise DataError(
            f"no feature files written: all {skipped} manifest images unreadable"
        )
    return ExtractSummary(images, files, skipped)
