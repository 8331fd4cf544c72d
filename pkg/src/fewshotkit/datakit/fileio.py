"""Binary episode (``FSEP``) and dataset (``FSDS``) files.

All integers and floats are little-endian. A file is ``magic | u16 version |
body | u32 crc32`` where the CRC covers every byte before it.

Episode body: ``u32 count`` then per episode ``u32 way, u32 shot, u32 query,
u64 seed, u32 dim, i64[way] class ids, f64[way*shot, dim] support, u32[way*shot]
support labels, f64[way*query, dim] query, u32[way*query] query labels``.

Dataset body: ``u32 dim, u32 n_classes, u32 name_len, utf-8 name`` then per
class ``i64 class id, u32 n, f64[n, dim] samples``.
"""
from __future__ import annotations

import hashlib
import struct
import zlib

import numpy as np

from ..errors import BadMagicError, ChecksumError, TruncatedFileError, VersionMismatchError
from .dataset import Dataset
from .episodes import Episode

EPISODE_MAGIC = b"FSEP"
DATASET_MAGIC = b"FSDS"
FORMAT_VERSION = 1

_F64 = np.dtype("<f8")
_U32 = np.dtype("<u4")
_I64 = np.dtype("<i8")


class _Reader:
    def __init__(self, buf, end, path):
        self.buf = buf
        self.pos = 0
        self.end = end
        self.path = path

    def take(self, n):
        if self.pos + n > self.end:
            raise TruncatedFileError(f"{self.path}: truncated at byte {self.pos} (need {n} more)")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count, shape=None):
        raw = self.take(dtype.itemsize * count)
        arr = np.frombuffer(raw, dtype=dtype).astype(dtype.newbyteorder("="))
        return arr.reshape(shape) if shape is not None else arr


def _open_checked(path, magic):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 6:
        raise TruncatedFileError(f"{path}: file too short for a header")
    if buf[:4] != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, found {buf[:4]!r}")
    (version,) = struct.unpack("<H", buf[4:6])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, supported {FORMAT_VERSION}")
    if len(buf) < 10:
        raise TruncatedFileError(f"{path}: missing checksum")
    return buf


def _verify_tail(reader, buf, path):
    if reader.pos != len(buf) - 4:
        raise TruncatedFileError(f"{path}: {len(buf) - 4 - reader.pos} unexpected trailing bytes")
    (stored,) = struct.unpack("<I", buf[-4:])
    actual = zlib.crc32(buf[:-4]) & 0xFFFFFFFF
    if stored != actual:
        raise ChecksumError(f"{path}: CRC32 mismatch (stored {stored:08x}, computed {actual:08x})")


def _write(path, payload):
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def encode_episodes(episodes) -> bytes:
    parts = [EPISODE_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(episodes))]
    for ep in episodes:
        dim = ep.support_x.shape[1]
        parts.append(struct.pack("<IIIQI", ep.way, ep.shot, ep.query_shot, ep.seed, dim))
        parts.append(np.asarray(ep.classes, dtype=_I64).tobytes())
        parts.append(np.ascontiguousarray(ep.support_x, dtype=_F64).tobytes())
        parts.append(np.asarray(ep.support_y, dtype=_U32).tobytes())
        parts.append(np.ascontiguousarray(ep.query_x, dtype=_F64).reshape(-1, dim).tobytes())
        parts.append(np.asarray(ep.query_y, dtype=_U32).tobytes())
    return b"".join(parts)


def save_episodes(path, episodes):
    _write(path, encode_episodes(episodes))


def load_episodes(path):
    buf = _open_checked(path, EPISODE_MAGIC)
    r = _Reader(buf, len(buf) - 4, path)
    r.pos = 6
    (count,) = r.unpack("<I")
    episodes = []
    for _ in range(count):
        way, shot, query, seed, dim = r.unpack("<IIIQI")
        classes = r.array(_I64, way)
        ns, nq = way * shot, way * query
        sx = r.array(_F64, ns * dim, (ns, dim))
        sy = r.array(_U32, ns).astype(np.int64)
        qx = r.array(_F64, nq * dim, (nq, dim))
        qy = r.array(_U32, nq).astype(np.int64)
        episodes.append((way, shot, query, classes, sx, sy, qx, qy, seed))
    _verify_tail(r, buf, path)
    return [Episode(w, s, q, tuple(int(c) for c in cl), sx, sy, qx, qy, seed)
            for (w, s, q, cl, sx, sy, qx, qy, seed) in episodes]


def save_dataset(path, dataset: Dataset):
    name = dataset.name.encode("utf-8")
    parts = [DATASET_MAGIC, struct.pack("<HIII", FORMAT_VERSION, dataset.dim,
                                        len(dataset.classes), len(name)), name]
    for c in dataset.classes:
        arr = dataset.samples[c]
        parts.append(struct.pack("<qI", c, arr.shape[0]))
        parts.append(np.ascontiguousarray(arr, dtype=_F64).tobytes())
    _write(path, b"".join(parts))


def load_dataset(path) -> Dataset:
    buf = _open_checked(path, DATASET_MAGIC)
    r = _Reader(buf, len(buf) - 4, path)
    r.pos = 6
    dim, n_classes, name_len = r.unpack("<III")
    name = r.take(name_len).decode("utf-8")
    samples = {}
    for _ in range(n_classes):
        c, n = r.unpack("<qI")
        samples[c] = r.array(_F64, n * dim, (n, dim))
    _verify_tail(r, buf, path)
    return Dataset(dim, samples, name)


def file_checksum(path):
    """SHA-256 of a whole file as hex (for manifests).

    A CRC would not do here: every file that ends in its own CRC32 has the
    same CRC32 residue.
    """
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
