"""Desk-scale MLP backbone and its cross-entropy pre-training."""
from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    BackboneParams,
    Block,
    backbone_forward,
    cross_entropy_smoothed,
    init_backbone,
    mixup,
    smooth_labels,
)
from .pretrain import PretrainConfig, PretrainResult, accuracy, pretrain

__all__ = [
    "BackboneParams", "Block", "PretrainConfig", "PretrainResult", "accuracy",
    "backbone_forward", "cross_entropy_smoothed", "init_backbone", "load_checkpoint",
    "mixup", "pretrain", "save_checkpoint", "smooth_labels",
]
