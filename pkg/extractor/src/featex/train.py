"""Fine-tuning on synthetic defects as a multi-class proxy task.

Normal images (label 0) and generated defect images (labels 1..6 by
default) train the tapped backbone plus a pooled linear head under
cross-entropy.  One optimizer step per iteration; each iteration's
batch is sampled with replacement and pushed through in micro-batches
whose gradients accumulate, so arbitrarily large nominal batch sizes
fit in memory.  The learning rate follows a cosine curve from its
initial value down to zero across the configured iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F

from .backbones import (
    ExtractorConfig,
    HIERARCHY_CHANNELS,
    HierarchyBackbone,
    build_backbone,
    save_checkpoint,
)
from .exceptions import DataError
from .extract import load_image_tensor
from .formats import read_manifest, resolve_path

log = logging.getLogger("featex")


@dataclass(frozen=True)
class ProxyTrainConfig:
    """Optimization hyperparameters for the proxy classification task."""

    classes: int = 7
    learning_rate: float = 0.03
    batch_size: int = 1024
    micro_batch: int = 64
    iterations: int = 300
    input_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError(f"classes must be at least 2, got {self.classes}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")
        if not 1 <= self.micro_batch <= self.batch_size:
            raise ValueError(
                f"micro batch must be in [1, {self.batch_size}], got {self.micro_batch}"
            )
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if self.input_size < 1:
            raise ValueError(f"input size must be positive, got {self.input_size}")
        if not 0 <= self.seed < 2**63:
            raise ValueError("seed must fit an unsigned 63-bit integer")


class ProxyClassifier(nn.Module):
    """Backbone taps with a pooled linear head over hierarchy 3."""

    def __init__(self, taps: HierarchyBackbone, classes: int):
        super().__init__()
        self.taps = taps
        self.head = nn.Linear(HIERARCHY_CHANNELS[taps.name][3], classes)

    def forward(self, x):
        _, h3 = self.taps(x)
        return self.head(F.adaptive_avg_pool2d(h3, 1).flatten(1))


@dataclass(frozen=True)
class TrainResult:
    loss_trace: tuple
    checkpoint_path: str
    log_path: str


def run_log_header(model_cfg: ExtractorConfig, cfg: ProxyTrainConfig) -> list:
    """Config echo written at the top of every training log."""
    return [
        f"backbone={model_cfg.backbone}",
        f"weights={model_cfg.weights}",
        f"classes={cfg.classes}",
        f"lr={cfg.learning_rate:g}",
        f"batch_size={cfg.batch_size}",
        f"micro_batch={cfg.micro_batch}",
        f"iterations={cfg.iterations}",
        f"input_size={cfg.input_size}",
        f"seed={cfg.seed}",
    ]


def _load_samples(manifest):
    base_dir = Path(manifest).parent
    return [
        (resolve_path(base_dir, e.image_path), e.label, e.image_path)
        for e in read_manifest(manifest)
    ]


def train_proxy(
    normal_manifest,
    synth_manifest,
    cfg: ProxyTrainConfig,
    model_cfg: ExtractorConfig,
    checkpoint_path,
    log_path=None,
) -> TrainResult:
    """Fine-tune the backbone and write a checkpoint plus a run log.

    Labels from both manifests must lie in ``0..classes-1``.  The
    checkpoint stores the backbone weights (reusable as the ``weights``
    source of an extraction config) and the classifier head.
    """
    samples = _load_samples(normal_manifest) + _load_samples(synth_manifest)
    for _, label, name in samples:
        if not 0 <= label < cfg.classes:
            raise DataError(
                f"label {label} for {name!r} outside 0..{cfg.classes - 1}"
            )
    stacked = []
    for path, _, name in samples:
        try:
            stacked.append(load_image_tensor(path, cfg.input_size))
        except OSError as exc:
            raise DataError(f"unreadable training image {name!r}: {exc}") from exc
    x_all = torch.stack(stacked)
    y_all = torch.tensor([label for _, label, _ in samples], dtype=torch.long)

    taps = build_backbone(model_cfg)
    torch.manual_seed(cfg.seed)  # head init and batch sampling
    model = ProxyClassifier(taps, cfg.classes)
    model.train()
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate)
    schedule = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=cfg.iterations
    )
    sampler = torch.Generator().manual_seed(cfg.seed)

    lines = run_log_header(model_cfg, cfg)
    trace = []
    n = len(samples)
    for step in range(cfg.iterations):
        lr_now = optimizer.param_groups[0]["lr"]
        optimizer.zero_grad()
        picked = torch.randint(0, n, (cfg.batch_size,), generator=sampler)
        total = 0.0
        for chunk in picked.split(cfg.micro_batch):
            loss = F.cross_entropy(model(x_all[chunk]), y_all[chunk], reduction="sum")
            (loss / cfg.batch_size).backward()
            total += float(loss.detach())
        optimizer.step()
        schedule.step()
        mean_loss = total / cfg.batch_size
        trace.append(mean_loss)
        lines.append(
            f"iter {step + 1}/{cfg.iterations} lr={lr_now:.6g} loss={mean_loss:.6f}"
        )
        log.info("iter %d/%d loss=%.6f", step + 1, cfg.iterations, mean_loss)

    model.eval()
    save_checkpoint(
        checkpoint_path, taps, head_state=model.head.state_dict(), classes=cfg.classes
    )
    out_log = Path(log_path) if log_path else Path(f"{checkpoint_path}.log")
    out_log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return TrainResult(tuple(trace), str(checkpoint_path), str(out_log))
