"""Support-based classifier initialisation and (transductive) fine-tuning."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..backbone import backbone_forward
from ..errors import AdaptationError, ConfigError, ContractError, ShapeError
from ..ndgrad import (
    Tensor,
    adam,
    backward,
    entropy_rows,
    l2_normalize,
    log_softmax,
    no_grad,
    relu,
    softmax,
    step,
    zero_grad,
)

UPDATE_ORDER = "support-then-query"


@dataclass
class AdaptConfig:
    epochs: int = 25
    lr: float = 2e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    entropy_coefficient: float = 1.0
    temperature: float = 1.0
    entropy_scale_by_log_way: bool = False
    freeze_backbone: bool = False
    head_input: str = "logits"
    relu_before_norm: bool = True
    adapt_bn: str = "batch"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.entropy_coefficient < 0:
            raise ConfigError("entropy_coefficient must be >= 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.head_input not in ("logits", "features"):
            raise ConfigError("head_input must be 'logits' or 'features'")
        if self.adapt_bn not in ("batch", "running"):
            raise ConfigError("adapt_bn must be 'batch' or 'running'")

    def to_dict(self):
        return asdict(self)


@dataclass
class HeadParams:
    w: Tensor
    b: Tensor

    @property
    def way(self):
        return self.w.shape[0]


@dataclass
class AdaptedModel:
    backbone: object
    head: HeadParams
    head_input: str = "logits"
    relu_before_norm: bool = True
    temperature: float = 1.0

    def parameters(self, freeze_backbone=False):
        ps = [] if freeze_backbone else self.backbone.parameters()
        return ps + [self.head.w, self.head.b]


def embed(theta, x, mode="logits", relu_before_norm=True, bn_mode="eval"):
    """``ReLU(z) / ||ReLU(z)||`` of the backbone logits or penultimate features."""
    if mode not in ("logits", "features"):
        raise ContractError(f"embedding mode must be 'logits' or 'features', got {mode!r}")
    logits, feats = backbone_forward(theta, x, bn_mode, return_features=True)
    z = logits if mode == "logits" else feats
    if relu_before_norm:
        z = relu(z)
    return l2_normalize(z)


def _class_means(emb, labels, way):
    labels = np.asarray(labels)
    means = np.zeros((way, emb.shape[1]))
    for k in range(way):
        rows = emb[labels == k]
        if len(rows) == 0:
            raise ContractError(f"class {k} has no support samples")
        means[k] = rows.mean(axis=0)
    return means


def init_from_embeddings(emb, labels, way):
    """Rows are the L2-normalised per-class mean embeddings; bias is zero."""
    means = _class_means(np.asarray(emb, dtype=np.float64), labels, way)
    with no_grad():
        w = l2_normalize(Tensor(means)).data
    return HeadParams(Tensor(w, True, "head_w"), Tensor(np.zeros(way), True, "head_b"))


def support_init(theta, support_x, support_y, way=None, mode="logits", relu_before_norm=True):
    way = int(np.max(support_y)) + 1 if way is None else way
    if len(support_y) == 0:
        raise ContractError("empty support set")
    with no_grad():
        emb = embed(theta, support_x, mode, relu_before_norm, "eval").data
    return init_from_embeddings(emb, support_y, way)


def head_logits(model, x, bn_mode="eval"):
    e = embed(model.backbone, x, model.head_input, model.relu_before_norm, bn_mode)
    if e.shape[1] != model.head.w.shape[1]:
        raise ShapeError(f"head expects {model.head.w.shape[1]} inputs, got {e.shape[1]}")
    z = e @ model.head.w.T + model.head.b
    if model.temperature != 1.0:
        z = z * (1.0 / model.temperature)
    return z


def head_forward(model, x, bn_mode="eval"):
    """Class probabilities ``softmax((w . embed(x) + b) / T)`` as an array."""
    with no_grad():
        return softmax(head_logits(model, x, bn_mode)).data


def build_model(theta, support_x, support_y, way, config: AdaptConfig):
    theta = theta.copy()
    head = support_init(theta, support_x, support_y, way, config.head_input,
                        config.relu_before_norm)
    return AdaptedModel(theta, head, config.head_input, config.relu_before_norm,
                        config.temperature)


@dataclass
class AdaptTraces:
    support_loss: list = field(default_factory=list)
    query_entropy: list = field(default_factory=list)


def _bn_mode(config):
    if config.freeze_backbone or config.adapt_bn == "running":
        return "eval"
    return "train"


def _support_loss(model, x, y, bn_mode):
    logits = head_logits(model, x, bn_mode)
    n = len(y)
    picked = log_softmax(logits) * _one_hot(y, model.head.way)
    return -picked.sum() * (1.0 / n)


def _one_hot(y, k):
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


def _check(loss, what, epoch):
    value = loss.item()
    if not math.isfinite(value):
        raise AdaptationError(f"{what} diverged in adaptation epoch {epoch}")
    return value


def entropy_weight(config, way):
    coef = config.entropy_coefficient
    if config.entropy_scale_by_log_way and way > 1:
        coef /= math.log(way)
    return coef


def _adapt(model, support_x, support_y, query_x, config):
    support_y = np.asarray(support_y, dtype=np.int64)
    params = model.parameters(config.freeze_backbone)
    opt = adam(config.lr, config.beta1, config.beta2, config.eps)
    bn_mode = _bn_mode(config)
    traces = AdaptTraces()
    coef = entropy_weight(config, model.head.way) if query_x is not None else 0.0
    for epoch in range(config.epochs):
        loss = _support_loss(model, support_x, support_y, bn_mode)
        traces.support_loss.append(_check(loss, "support loss", epoch))
        zero_grad(params)
        backward(loss)
        step(params, opt)
        if coef == 0.0:
            continue
        ent = entropy_rows(head_logits(model, query_x, bn_mode)).mean()
        traces.query_entropy.append(_check(ent, "query entropy", epoch))
        zero_grad(params)
        backward(ent * coef)
        step(params, opt)
    zero_grad(params)
    return model, traces


def finetune(model, support_x, support_y, config: AdaptConfig):
    """Adam on the support cross-entropy only; no regularisation."""
    return _adapt(model, support_x, support_y, None, config)


def transductive_finetune(model, support_x, support_y, query_x, config: AdaptConfig):
    """Alternate a support cross-entropy step and a query entropy step per epoch.

    Only query inputs are taken; their labels never reach this function.
    """
    if query_x is None or len(query_x) == 0:
        raise ContractError("transductive fine-tuning needs query inputs; use finetune()")
    return _adapt(model, support_x, support_y, np.asarray(query_x, dtype=np.float64), config)
