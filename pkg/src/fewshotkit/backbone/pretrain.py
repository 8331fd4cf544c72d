from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..datakit import augment, make_rng
from ..errors import ConfigError, ContractError, ShapeError, TrainingError
from ..ndgrad import LrSchedule, backward, lr_at, no_grad, sgd_nesterov, step, zero_grad
from .model import backbone_forward, cross_entropy_smoothed, init_backbone, mixup, smooth_labels

log = logging.getLogger(__name__)


@dataclass
class PretrainConfig:
    hidden: tuple = (64, 64)
    label_smoothing: float = 0.1
    mixup_alpha: float = 0.25
    mixup: bool = True
    batch_size: int = 128
    momentum: float = 0.9
    weight_decay: float = 1e-4
    cycles: tuple = (8, 16)
    end_lr: float = 1e-6
    augment_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.cycles = tuple(int(c) for c in self.cycles)
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("label_smoothing must be in [0, 1)")
        if self.mixup and self.mixup_alpha <= 0:
            raise ConfigError("mixup_alpha must be > 0 when mixup is enabled")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if not self.cycles or min(self.cycles) < 1:
            raise ConfigError("cycles must be a non-empty list of positive epoch counts")

    @property
    def schedule(self):
        return LrSchedule.from_lengths(self.cycles, self.end_lr)

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["cycles"] = list(self.cycles)
        return d


@dataclass
class PretrainResult:
    params: object
    loss_trace: list = field(default_factory=list)
    lr_trace: list = field(default_factory=list)
    initial_loss: float = float("nan")
    train_accuracy: float = float("nan")


def _mean_loss(params, x, targets, batch_size):
    total = 0.0
    with no_grad():
        for i in range(0, len(x), batch_size):
            logits = backbone_forward(params, x[i:i + batch_size], "eval")
            total += cross_entropy_smoothed(logits, targets[i:i + batch_size]).item() \
                * len(logits.data)
    return total / len(x)


def accuracy(params, x, y, batch_size=1024):
    correct = 0
    with no_grad():
        for i in range(0, len(x), batch_size):
            logits = backbone_forward(params, x[i:i + batch_size], "eval").data
            correct += int((logits.argmax(axis=1) == y[i:i + batch_size]).sum())
    return correct / len(x)


def pretrain(dataset, classes, config=None):
    """Cross-entropy pre-training of a fresh backbone on ``classes``.

    Each step augments, smooths labels, then mixes the batch with a shuffled
    copy of itself, and takes a Nesterov SGD step at the cyclic cosine rate.
    """
    config = config or PretrainConfig()
    classes = sorted(int(c) for c in classes)
    if len(classes) < 2:
        raise ContractError("pre-training needs at least two classes")
    x, y = dataset.arrays(classes)
    k = len(classes)
    rng = make_rng(config.seed)
    params = init_backbone(dataset.dim, config.hidden, k, seed=int(rng.integers(2**63)),
                           class_ids=classes)
    if params.in_dim != x.shape[1]:
        raise ShapeError("dataset dimension differs from the model input")
    clean_targets = smooth_labels(y, k, config.label_smoothing)
    schedule = config.schedule
    opt = sgd_nesterov(momentum=config.momentum, weight_decay=config.weight_decay)
    plist = params.parameters()
    bs = min(config.batch_size, len(x))
    steps = len(x) // bs
    result = PretrainResult(params)
    result.initial_loss = _mean_loss(params, x, clean_targets, 1024)

    for epoch in range(schedule.total_epochs):
        perm = rng.permutation(len(x))
        epoch_loss = 0.0
        for j in range(steps):
            idx = perm[j * bs:(j + 1) * bs]
            xb = augment(x[idx], config.augment_sigma, rng)
            tb = clean_targets[idx]
            if config.mixup:
                pair = rng.permutation(len(idx))
                xb, tb, _ = mixup(xb, tb, xb[pair], tb[pair], config.mixup_alpha, rng)
            lr = lr_at(schedule, epoch, j / steps)
            loss = cross_entropy_smoothed(backbone_forward(params, xb, "train"), tb)
            if not math.isfinite(loss.item()):
                raise TrainingError(f"loss diverged in epoch {epoch}", epoch=epoch)
            zero_grad(plist)
            backward(loss)
            step(plist, opt, lr=lr)
            epoch_loss += loss.item()
        result.loss_trace.append(epoch_loss / steps)
        result.lr_trace.append(lr_at(schedule, epoch, 0.0))
        log.debug("epoch %d loss %.4f", epoch, result.loss_trace[-1])

    result.train_accuracy = accuracy(params, x, y)
    return result
