from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, SamplingError
from .dataset import derive_seed, make_rng


@dataclass(eq=False)
class Episode:
    """One few-shot task.

    Labels are local (0..way-1) in ascending global class-id order; the
    global ids live in ``classes``. Support rows are class-major.
    """

    way: int
    shot: int
    query_shot: int
    classes: tuple
    support_x: np.ndarray
    support_y: np.ndarray
    query_x: np.ndarray
    query_y: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.classes = tuple(int(c) for c in self.classes)
        if len(self.classes) != self.way:
            raise ContractError("class table length differs from way")
        if len(self.support_y) != self.way * self.shot:
            raise ContractError("support size differs from way * shot")
        if len(self.query_y) != self.way * self.query_shot:
            raise ContractError("query size differs from way * query_shot")

    @property
    def dim(self):
        return self.support_x.shape[1]

    @property
    def protocol(self):
        return protocol_name(self.way, self.shot, self.query_shot)

    def __eq__(self, other):
        if not isinstance(other, Episode):
            return NotImplemented
        return (
            (self.way, self.shot, self.query_shot, self.classes, self.seed)
            == (other.way, other.shot, other.query_shot, other.classes, other.seed)
            and all(np.array_equal(a, b) for a, b in (
                (self.support_x, other.support_x), (self.support_y, other.support_y),
                (self.query_x, other.query_x), (self.query_y, other.query_y)))
        )


def protocol_name(way, shot, query_shot):
    return f"{way}w{shot}s{query_shot}q"


def sample_episode(dataset, classes, way, shot, query_shot, rng, seed=None) -> Episode:
    """Draw an episode from the class pool ``classes``.

    ``rng`` is either a seed (stored on the episode) or a Generator. Draw
    order: the ``way`` classes first, then, per class in id order, ``shot +
    query_shot`` distinct indices of which the first ``shot`` are support.
    """
    if isinstance(rng, (int, np.integer)):
        seed = int(rng) if seed is None else seed
        rng = make_rng(rng)
    pool = sorted(int(c) for c in classes)
    if shot < 1 or query_shot < 0:
        raise SamplingError("need shot >= 1 and query_shot >= 0")
    if way < 1 or way > len(pool):
        raise SamplingError(f"way {way} exceeds the {len(pool)} classes available")
    chosen = sorted(int(c) for c in rng.choice(pool, size=way, replace=False))
    need = shot + query_shot
    sx, sy, qx, qy = [], [], [], []
    for label, c in enumerate(chosen):
        n = dataset.class_size(c)
        if n < need:
            raise SamplingError(f"class {c} has {n} samples, episode needs {need}")
        idx = rng.choice(n, size=need, replace=False)
        data = dataset.samples[c]
        sx.append(data[idx[:shot]])
        qx.append(data[idx[shot:]])
        sy.append(np.full(shot, label, dtype=np.int64))
        qy.append(np.full(query_shot, label, dtype=np.int64))
    dim = dataset.dim
    return Episode(
        way, shot, query_shot, tuple(chosen),
        np.concatenate(sx).reshape(-1, dim), np.concatenate(sy),
        np.concatenate(qx).reshape(-1, dim), np.concatenate(qy),
        0 if seed is None else int(seed),
    )


def mint_episodes(dataset, classes, way, shot, query_shot, n_episodes, master_seed,
                  stream="episodes"):
    """``n_episodes`` episodes, episode ``i`` seeded from ``(master_seed, stream, i)``."""
    out = []
    for i in range(n_episodes):
        s = derive_seed(master_seed, stream, way, shot, query_shot, i)
        out.append(sample_episode(dataset, classes, way, shot, query_shot, s))
    return out
