"""Minimal reverse-mode autodiff with the optimizers used for training."""
from .kernels import BACKEND
from .optim import LrSchedule, OptimizerState, adam, lr_at, sgd_nesterov, step, zero_grad
from .tensor import (
    OPS,
    Tensor,
    as_tensor,
    backward,
    batchnorm,
    entropy_rows,
    forward_op,
    l2_normalize,
    log_softmax,
    no_grad,
    relu,
    set_strict,
    shannon_entropy,
    softmax,
    strict_mode,
)

__all__ = [
    "BACKEND", "LrSchedule", "OptimizerState", "OPS", "Tensor", "adam", "as_tensor",
    "backward", "batchnorm", "entropy_rows", "forward_op", "l2_normalize", "log_softmax",
    "lr_at", "no_grad", "relu", "set_strict", "sgd_nesterov", "shannon_entropy", "softmax",
    "step", "strict_mode", "zero_grad",
]
