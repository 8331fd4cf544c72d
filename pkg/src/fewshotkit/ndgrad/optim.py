"""SGD with Nesterov momentum, Adam, and cyclic cosine learning rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, NumericError, ShapeError
from . import kernels
from .tensor import is_strict


@dataclass
class OptimizerState:
    kind: str = "sgd_nesterov"
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd_nesterov", "sgd", "adam"):
            raise ContractError(f"unknown optimizer kind {self.kind!r}")


def sgd_nesterov(lr=0.1, momentum=0.9, weight_decay=1e-4):
    return OptimizerState("sgd_nesterov", lr=lr, momentum=momentum, weight_decay=weight_decay)


def adam(lr=5e-5, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    return OptimizerState("adam", lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                          weight_decay=weight_decay, momentum=0.0)


def step(params, state, lr=None, grads=None):
    """Update ``params`` in place.

    ``grads`` defaults to each parameter's ``.grad``; a parameter with no
    gradient is treated as having a zero gradient so that weight decay still
    applies. Parameters flagged ``decay_exempt`` are never decayed.
    """
    lr = state.lr if lr is None else lr
    state.step_count += 1
    t = state.step_count
    for i, p in enumerate(params):
        g = p.grad if grads is None else grads[i]
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        if is_strict() and not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {p.name or i}")
        wd = 0.0 if p.decay_exempt else state.weight_decay
        key = id(p)
        flat = p.data.reshape(-1)
        gflat = np.ascontiguousarray(g).reshape(-1)
        if state.kind == "adam":
            if key not in state.slots:
                state.slots[key] = (np.zeros_like(flat), np.zeros_like(flat))
            m, v = state.slots[key]
            kernels.adam_update(flat, gflat, m, v, lr, state.beta1, state.beta2,
                                state.eps, t, wd)
        else:
            if key not in state.slots:
                state.slots[key] = np.zeros_like(flat)
            kernels.sgd_update(flat, gflat, state.slots[key], lr, state.momentum, wd,
                               state.kind == "sgd_nesterov")


def zero_grad(params):
    for p in params:
        p.grad = None


@dataclass(frozen=True)
class LrSchedule:
    """Consecutive cosine-annealed cycles of ``(start_lr, end_lr, epochs)``."""

    cycles: tuple

    @classmethod
    def from_lengths(cls, lengths, end_lr=1e-6):
        # cycle i (1-based) starts at 10**-i
        return cls(tuple((10.0 ** -(i + 1), end_lr, n) for i, n in enumerate(lengths)))

    @property
    def total_epochs(self):
        return sum(c[2] for c in self.cycles)


def lr_at(schedule, epoch, step_fraction=0.0):
    """Learning rate at ``epoch + step_fraction`` epochs into the schedule."""
    t = epoch + step_fraction
    if t < 0 or t > schedule.total_epochs:
        raise ValueError(f"epoch {t} outside schedule of {schedule.total_epochs} epochs")
    offset = 0.0
    for i, (start, end, length) in enumerate(schedule.cycles):
        last = i == len(schedule.cycles) - 1
        if t < offset + length or last:
            local = t - offset
            return end + (start - end) * (1.0 + math.cos(math.pi * local / length)) / 2.0
        offset += length
    raise AssertionError("unreachable")
