"""``FSBB`` checkpoint files.

Layout (little-endian): ``"FSBB" | u16 version | u32 in_dim | u32 n_blocks |
u32[n_blocks] widths | u32 n_logits | i64[n_logits] class ids`` then for each
block ``weight, bias, gamma, beta, running_mean, running_var`` as f64 blobs,
then the output weight and bias, then a CRC32 of everything before it.
A JSON sidecar (``<path>.json``) echoes the training configuration.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from ..datakit.fileio import FORMAT_VERSION, _open_checked, _Reader, _verify_tail, _write
from ..ndgrad import Tensor
from .model import BackboneParams, Block

MAGIC = b"FSBB"
_F64 = np.dtype("<f8")
_I64 = np.dtype("<i8")


def save_checkpoint(path, params: BackboneParams, config=None):
    params.validate()
    widths = params.widths
    class_ids = params.class_ids or tuple(range(params.n_logits))
    parts = [MAGIC, struct.pack("<HII", FORMAT_VERSION, params.in_dim, len(widths)),
             struct.pack(f"<{len(widths)}I", *widths),
             struct.pack("<I", params.n_logits),
             np.asarray(class_ids, dtype=_I64).tobytes()]
    for b in params.blocks:
        for arr in (b.weight.data, b.bias.data, b.gamma.data, b.beta.data,
                    b.running_mean, b.running_var):
            parts.append(np.ascontiguousarray(arr, dtype=_F64).tobytes())
    parts.append(np.ascontiguousarray(params.out_weight.data, dtype=_F64).tobytes())
    parts.append(np.ascontiguousarray(params.out_bias.data, dtype=_F64).tobytes())
    _write(path, b"".join(parts))
    if config is not None:
        with open(f"{path}.json", "w") as fh:
            json.dump(config, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_checkpoint(path) -> BackboneParams:
    buf = _open_checked(path, MAGIC)
    r = _Reader(buf, len(buf) - 4, path)
    r.pos = 6
    in_dim, n_blocks = r.unpack("<II")
    widths = r.unpack(f"<{n_blocks}I")
    (n_logits,) = r.unpack("<I")
    class_ids = tuple(int(c) for c in r.array(_I64, n_logits))
    blocks = []
    prev = in_dim
    for w in widths:
        weight = r.array(_F64, prev * w, (prev, w))
        bias, gamma, beta, rm, rv = (r.array(_F64, w) for _ in range(5))
        blocks.append(Block(Tensor(weight, True, "weight"), Tensor(bias, True, "bias"),
                            Tensor(gamma, True, "bn_gamma", decay_exempt=True),
                            Tensor(beta, True, "bn_beta", decay_exempt=True),
                            rm.copy(), rv.copy()))
        prev = w
    out_w = r.array(_F64, prev * n_logits, (prev, n_logits))
    out_b = r.array(_F64, n_logits)
    _verify_tail(r, buf, path)
    params = BackboneParams(blocks, Tensor(out_w, True, "out_weight"),
                            Tensor(out_b, True, "out_bias"), class_ids)
    params.validate()
    return params
