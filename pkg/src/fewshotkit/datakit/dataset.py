from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractError, ShapeError


def make_rng(seed):
    """Counter-based generator (Philox) so streams are platform independent."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _label_key(label):
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    return int(label) & 0xFFFFFFFF


def derive_seed(master, *labels):
    """64-bit seed for the sub-stream named by ``labels`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_label_key(x) for x in labels))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class Dataset:
    """Per-class pools of feature vectors.

    ``samples`` maps class id to an ``(n_c, dim)`` float64 array.
    """

    dim: int
    samples: dict
    name: str = "dataset"

    def __post_init__(self):
        if not self.samples:
            raise ContractError("dataset has no classes")
        fixed = {}
        for c, arr in self.samples.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != self.dim:
                raise ShapeError(f"class {c}: expected (n, {self.dim}) samples, got {arr.shape}")
            if arr.shape[0] == 0:
                raise ContractError(f"class {c} has no samples")
            fixed[int(c)] = arr
        self.samples = dict(sorted(fixed.items()))

    @property
    def classes(self):
        return list(self.samples)

    def class_size(self, c):
        return self.samples[c].shape[0]

    def arrays(self, classes=None):
        """Stacked ``(x, y)`` for ``classes`` with labels relabeled 0..k-1 in id order."""
        classes = self.classes if classes is None else sorted(classes)
        xs = [self.samples[c] for c in classes]
        ys = [np.full(len(x), i, dtype=np.int64) for i, x in enumerate(xs)]
        return np.concatenate(xs), np.concatenate(ys)

    def subset(self, classes):
        return Dataset(self.dim, {c: self.samples[c] for c in classes}, self.name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.dim == other.dim and self.name == other.name
                and self.classes == other.classes
                and all(np.array_equal(self.samples[c], other.samples[c]) for c in self.classes))


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 100
    dim: int = 16
    samples_per_class: int = 60
    center_scale: float = 1.0
    noise_sigma: float = 1.0
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        for key in ("n_classes", "dim", "samples_per_class"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive")
        if self.noise_sigma <= 0:
            raise ConfigError("noise_sigma must be > 0")
        if self.center_scale < 0:
            raise ConfigError("center_scale must be >= 0")


def make_synthetic(spec: SyntheticSpec) -> Dataset:
    """Isotropic Gaussian clusters around centers drawn once per class."""
    rng = make_rng(spec.seed)
    centers = rng.normal(0.0, spec.center_scale, size=(spec.n_classes, spec.dim))
    samples = {}
    for c in range(spec.n_classes):
        noise = rng.normal(0.0, spec.noise_sigma, size=(spec.samples_per_class, spec.dim))
        samples[c] = centers[c] + noise
    return Dataset(spec.dim, samples, spec.name)


@dataclass(frozen=True)
class ClassSplit:
    train: tuple
    val: tuple
    test: tuple

    def __post_init__(self):
        a, b, c = set(self.train), set(self.val), set(self.test)
        if a & b or a & c or b & c:
            raise ContractError("class split parts overlap")

    def part(self, name):
        if name == "train+val":
            return tuple(sorted(self.train + self.val))
        if name not in ("train", "val", "test"):
            raise ConfigError(f"unknown split part {name!r}")
        return getattr(self, name)


def split_classes(dataset, fractions=(0.6, 0.2, 0.2), seed=0) -> ClassSplit:
    """Shuffle class ids and cut them into disjoint train/val/test parts."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")
    classes = np.array(dataset.classes)
    n = len(classes)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(f"{n} classes cannot fill split {tuple(fractions)} with non-empty parts")
    perm = make_rng(seed).permutation(n)
    shuffled = [int(c) for c in classes[perm]]
    return ClassSplit(
        tuple(sorted(shuffled[:n_train])),
        tuple(sorted(shuffled[n_train:n_train + n_val])),
        tuple(sorted(shuffled[n_train + n_val:])),
    )


def augment(x, noise_sigma, rng):
    """Additive i.i.d. Gaussian noise; the stand-in for image augmentation."""
    if noise_sigma < 0:
        raise ConfigError("noise_sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if noise_sigma == 0:
        return x.copy()
    return x + rng.normal(0.0, noise_sigma, size=x.shape)


def load_csv(path, name=None) -> Dataset:
    """One row per sample: class id, then the feature columns."""
    rows: dict = {}
    dim = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].startswith("#"):
                continue
            try:
                c = int(row[0])
                vec = [float(v) for v in row[1:]]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ConfigError(f"{path}:{lineno}: malformed row") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ShapeError(f"{path}:{lineno}: expected {dim} features, got {len(vec)}")
            rows.setdefault(c, []).append(vec)
    if dim is None:
        raise ConfigError(f"{path}: no samples")
    return Dataset(dim, {c: np.array(v) for c, v in rows.items()}, name or str(path))
