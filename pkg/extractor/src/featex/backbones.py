"""Convolutional backbones with taps on their two mid-level stages.

Hierarchy 2 is the output of the backbone's second residual stage and
hierarchy 3 the output of the third; for the VGG-class backbone, which
has no residual stages, the taps sit after its second and third pooling
blocks.  The architectures fix the channel counts and the spatial
halving from hierarchy 2 to hierarchy 3:

    backbone       h2 channels   h3 channels   h2 stride
    resnet18       128           256           1/8
    wideresnet50   512           1024          1/8
    vgg11          128           256           1/4

Weights come from one of three sources named by ``ExtractorConfig``:
torchvision's ImageNet distribution (``"imagenet"``, needs download
access), a deterministic seeded initialization (``"random"``, the
reproducible stand-in for offline environments), or a checkpoint file
written by the fine-tuning loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models as tv_models

from .exceptions import CheckpointError

BACKBONES = ("resnet18", "wideresnet50", "vgg11")

HIERARCHY_CHANNELS = {
    "resnet18": {2: 128, 3: 256},
    "wideresnet50": {2: 512, 3: 1024},
    "vgg11": {2: 128, 3: 256},
}

# global-RNG seed used for the "random" weights source
RANDOM_WEIGHTS_SEED = 0

CHECKPOINT_KIND = "featex-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ExtractorConfig:
    """What to run: architecture, weight source, input side, tap levels."""

    backbone: str = "resnet18"
    weights: str = "imagenet"  # "imagenet" | "random" | checkpoint path
    input_size: int = 256
    hierarchies: tuple = (2, 3)

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(
                f"unknown backbone {self.backbone!r}: choose from {BACKBONES}"
            )
        if not isinstance(self.weights, str) or not self.weights:
            raise ValueError(
                "weights must be 'imagenet', 'random', or a checkpoint path"
            )
        if self.input_size < 1:
            raise ValueError(f"input size must be positive, got {self.input_size}")
        levels = tuple(sorted({int(j) for j in self.hierarchies}))
        if not levels:
            raise ValueError("hierarchies must be non-empty")
        if any(j not in (2, 3) for j in levels):
            raise ValueError(
                f"hierarchies must be a subset of (2, 3), got {self.hierarchies}"
            )
        object.__setattr__(self, "hierarchies", levels)


def _tv_model(name: str, tv_weights):
    if name == "resnet18":
        return tv_models.resnet18(weights=tv_weights)
    if name == "wideresnet50":
        return tv_models.wide_resnet50_2(weights=tv_weights)
    return tv_models.vgg11(weights=tv_weights)


class HierarchyBackbone(nn.Module):
    """A backbone truncated after hierarchy 3.

    ``entry`` maps the image to the hierarchy-2 activation and
    ``deeper`` continues to hierarchy 3; everything past the third
    stage is dropped.  ``forward`` returns the ``(h2, h3)`` pair.
    """

    def __init__(self, name: str, source: nn.Module | None = None):
        super().__init__()
        if name not in BACKBONES:
            raise ValueError(f"unknown backbone {name!r}: choose from {BACKBONES}")
        self.name = name
        net = source if source is not None else _tv_model(name, None)
        if name == "vgg11":
            feats = net.features
            self.entry = feats[0:6]  # through the 2nd pooling layer
            self.deeper = feats[6:11]  # through the 3rd pooling layer
        else:
            self.entry = nn.Sequential(
                net.conv1, net.bn1, net.relu, net.maxpool, net.layer1, net.layer2
            )
            self.deeper = net.layer3

    def forward(self, x):
        h2 = self.entry(x)
        return h2, self.deeper(h2)

    def hierarchy_maps(self, x, levels=(2, 3)) -> dict:
        """Activation maps for the requested levels, keyed by level."""
        h2 = self.entry(x)
        out = {}
        if 2 in levels:
            out[2] = h2
        if 3 in levels:
            out[3] = self.deeper(h2)
        return out


def build_backbone(cfg: ExtractorConfig) -> HierarchyBackbone:
    """Construct the tapped backbone with the configured weights, in eval mode."""
    if cfg.weights == "random":
        torch.manual_seed(RANDOM_WEIGHTS_SEED)
        taps = HierarchyBackbone(cfg.backbone)
    elif cfg.weights == "imagenet":
        try:
            taps = HierarchyBackbone(
                cfg.backbone, source=_tv_model(cfg.backbone, "DEFAULT")
            )
        except Exception as exc:
            raise CheckpointError(
                f"could not fetch pretrained weights for {cfg.backbone}: {exc}; "
                f"pass weights='random' or a checkpoint path when offline"
            ) from exc
    else:
        taps = HierarchyBackbone(cfg.backbone)
        payload = load_checkpoint(cfg.weights)
        if payload["backbone"] != cfg.backbone:
            raise CheckpointError(
                f"checkpoint {cfg.weights} holds {payload['backbone']!r} weights, "
                f"config asks for {cfg.backbone!r}"
            )
        try:
            taps.load_state_dict(payload["backbone_state"])
        except RuntimeError as exc:
            raise CheckpointError(
                f"checkpoint {cfg.weights} does not fit {cfg.backbone}: {exc}"
            ) from exc
    taps.eval()
    return taps


def save_checkpoint(path, taps: HierarchyBackbone, head_state=None, classes=None) -> None:
    """Serialize backbone weights (and optionally a classifier head)."""
    payload = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "backbone": taps.name,
        "backbone_state": taps.state_dict(),
    }
    if head_state is not None:
        payload["head_state"] = head_state
        payload["classes"] = int(classes)
    torch.save(payload, path)


def load_checkpoint(path) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except Exception as exc:
        raise CheckpointError(f"not a loadable checkpoint: {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("kind") != CHECKPOINT_KIND:
        raise CheckpointError(f"{path} is not a backbone checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {payload.get('version')!r} in {path}"
        )
    if payload.get("backbone") not in BACKBONES:
        raise CheckpointError(f"{path} names an unknown backbone")
    if "backbone_state" not in payload:
        raise CheckpointError(f"{path} is missing its weight tensors")
    return payload
