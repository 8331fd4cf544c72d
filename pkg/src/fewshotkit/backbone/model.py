from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DomainError, ShapeError
from ..ndgrad import Tensor, batchnorm, log_softmax, relu

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


@dataclass
class Block:
    """linear -> batchnorm -> ReLU"""

    weight: Tensor
    bias: Tensor
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class BackboneParams:
    blocks: list
    out_weight: Tensor
    out_bias: Tensor
    class_ids: tuple = field(default_factory=tuple)

    @property
    def in_dim(self):
        return self.blocks[0].weight.shape[0] if self.blocks else self.out_weight.shape[0]

    @property
    def feature_dim(self):
        return self.out_weight.shape[0]

    @property
    def n_logits(self):
        return self.out_weight.shape[1]

    @property
    def widths(self):
        return tuple(b.weight.shape[1] for b in self.blocks)

    def parameters(self):
        ps = []
        for b in self.blocks:
            ps += [b.weight, b.bias, b.gamma, b.beta]
        return ps + [self.out_weight, self.out_bias]

    def copy(self):
        return copy.deepcopy(self)

    def validate(self):
        prev = self.in_dim
        for i, b in enumerate(self.blocks):
            w = b.weight.shape[1]
            if b.weight.shape[0] != prev or b.bias.shape != (w,) or b.gamma.shape != (w,) \
                    or b.beta.shape != (w,) or b.running_mean.shape != (w,) \
                    or b.running_var.shape != (w,):
                raise ShapeError(f"block {i} shapes do not chain")
            if not (b.gamma.decay_exempt and b.beta.decay_exempt):
                raise ContractError(f"block {i} batchnorm parameters must be decay-exempt")
            prev = w
        if self.out_weight.shape[0] != prev or self.out_bias.shape != (self.n_logits,):
            raise ShapeError("output layer shapes do not chain")
        if self.class_ids and len(self.class_ids) != self.n_logits:
            raise ShapeError("class id table length differs from the logit count")


def init_backbone(in_dim, widths, n_out, seed=0, class_ids=()):
    """He-initialised MLP; the output layer starts small so logits are near uniform."""
    rng = np.random.Generator(np.random.Philox(seed))
    blocks = []
    prev = in_dim
    for w in widths:
        blocks.append(Block(
            Tensor(rng.normal(0.0, np.sqrt(2.0 / prev), (prev, w)), True, "weight"),
            Tensor(np.zeros(w), True, "bias"),
            Tensor(np.ones(w), True, "bn_gamma", decay_exempt=True),
            Tensor(np.zeros(w), True, "bn_beta", decay_exempt=True),
            np.zeros(w),
            np.ones(w),
        ))
        prev = w
    params = BackboneParams(
        blocks,
        Tensor(rng.normal(0.0, 0.01, (prev, n_out)), True, "out_weight"),
        Tensor(np.zeros(n_out), True, "out_bias"),
        tuple(class_ids),
    )
    params.validate()
    return params


def backbone_forward(params, x, mode="train", return_features=False):
    """Logits over the meta-training classes, shape ``(batch, n_logits)``.

    ``mode="train"`` normalises with batch statistics and refreshes the
    running statistics; ``mode="eval"`` uses the running statistics.
    With ``return_features`` the penultimate activations are returned too.
    """
    if mode not in ("train", "eval"):
        raise ContractError(f"mode must be 'train' or 'eval', got {mode!r}")
    h = x if isinstance(x, Tensor) else Tensor(x)
    if h.ndim != 2 or h.shape[1] != params.in_dim:
        raise ShapeError(f"expected input (batch, {params.in_dim}), got {h.shape}")
    training = mode == "train"
    for b in params.blocks:
        h = h @ b.weight + b.bias
        h = batchnorm(h, b.gamma, b.beta, b.running_mean, b.running_var, training,
                      BN_MOMENTUM, BN_EPS)
        h = relu(h)
    logits = h @ params.out_weight + params.out_bias
    return (logits, h) if return_features else logits


def smooth_labels(y, num_classes, eps):
    """Targets with ``1 - eps`` on the true class and ``eps / (K - 1)`` elsewhere."""
    if num_classes < 2:
        raise DomainError("label smoothing needs at least two classes")
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"smoothing eps must be in [0, 1), got {eps}")
    y = np.asarray(y, dtype=np.int64)
    if np.any((y < 0) | (y >= num_classes)):
        raise DomainError("label out of range")
    out = np.full(y.shape + (num_classes,), eps / (num_classes - 1))
    np.put_along_axis(out, y[..., None], 1.0 - eps, axis=-1)
    return out


def mixup(x1, y1, x2, y2, alpha, rng, lam=None):
    """Convex combination of two batches with ``lam ~ Beta(alpha, alpha)``.

    Returns ``(x, y, lam)``; pass ``lam`` to fix the mixing weight.
    """
    x1, x2 = np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)
    y1, y2 = np.asarray(y1, dtype=np.float64), np.asarray(y2, dtype=np.float64)
    if x1.shape != x2.shape or y1.shape != y2.shape:
        raise ShapeError("mixup batches differ in shape")
    if lam is None:
        if alpha <= 0:
            raise DomainError("mixup alpha must be > 0")
        lam = float(rng.beta(alpha, alpha))
    return lam * x1 + (1.0 - lam) * x2, lam * y1 + (1.0 - lam) * y2, lam


def cross_entropy_smoothed(logits, targets):
    """Batch mean of ``-sum_k t_k log_softmax(z)_k``."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ShapeError(f"targets {targets.shape} vs logits {logits.shape}")
    n = logits.shape[0]
    return -(log_softmax(logits) * targets).sum() * (1.0 / n)
