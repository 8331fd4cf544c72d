"""Kernel backend selection.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback is used. Setting ``FEWSHOTKIT_PURE=1`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("FEWSHOTKIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

KERNEL_NAMES = (
    "softmax_fwd", "log_softmax_fwd", "softmax_bwd", "log_softmax_bwd",
    "l2norm_fwd", "l2norm_bwd", "batchnorm_fwd", "batchnorm_bwd",
    "adam_update", "sgd_update",
)

softmax_fwd = _impl.softmax_fwd
log_softmax_fwd = _impl.log_softmax_fwd
softmax_bwd = _impl.softmax_bwd
log_softmax_bwd = _impl.log_softmax_bwd
l2norm_fwd = _impl.l2norm_fwd
l2norm_bwd = _impl.l2norm_bwd
batchnorm_fwd = _impl.batchnorm_fwd
batchnorm_bwd = _impl.batchnorm_bwd
adam_update = _impl.adam_update
sgd_update = _impl.sgd_update


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
