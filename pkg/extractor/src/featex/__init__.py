"""Mid-hierarchy CNN feature dumping with optional fine-tuning.

A pretrained (or seeded random, or fine-tuned) convolutional backbone
runs over manifest-listed images and writes its hierarchy-2 and
hierarchy-3 activation blocks to binary tensor files, one file per
image per level.  A companion training loop fine-tunes the same
backbone on synthetic-defect images as a multi-class proxy task and
emits checkpoints the extractor can load.  The tensor and manifest
file formats are shared with the patch-level detection package, which
consumes the dumped features.
"""

from .backbones import (
    BACKBONES,
    HIERARCHY_CHANNELS,
    ExtractorConfig,
    HierarchyBackbone,
    build_backbone,
    load_checkpoint,
    save_checkpoint,
)
from .exceptions import CheckpointError, DataError, FeatexError, FormatError
from .extract import ExtractSummary, extract_features, load_image_tensor
from .formats import (
    ManifestEntry,
    read_manifest,
    read_tensor,
    resolve_path,
    write_tensor,
)
from .train import (
    ProxyClassifier,
    ProxyTrainConfig,
    TrainResult,
    run_log_header,
    train_proxy,
)

__version__ = "0.1.0"

__all__ = [
    "BACKBONES",
    "CheckpointError",
    "DataError",
    "ExtractSummary",
    "ExtractorConfig",
    "FeatexError",
    "FormatError",
    "HIERARCHY_CHANNELS",
    "HierarchyBackbone",
    "ManifestEntry",
    "ProxyClassifier",
    "ProxyTrainConfig",
    "TrainResult",
    "build_backbone",
    "extract_features",
    "load_checkpoint",
    "load_image_tensor",
    "read_manifest",
    "read_tensor",
    "resolve_path",
    "run_log_header",
    "save_checkpoint",
    "train_proxy",
    "write_tensor",
]
