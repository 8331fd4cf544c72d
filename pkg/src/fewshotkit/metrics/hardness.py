"""Episode hardness: mean log-odds of misclassifying a query under a
cosine-softmax classifier anchored on the support embeddings."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..fewshot.adapt import embed, init_from_embeddings
from ..ndgrad import no_grad

P_CLAMP = 1e-12


@dataclass
class ReferenceExtractor:
    """Backbone used as the generic feature generator.

    It must have been trained on classes disjoint from the episodes it scores.
    """

    params: object
    mode: str = "logits"
    relu_before_norm: bool = True

    def __call__(self, x):
        with no_grad():
            return embed(self.params, x, self.mode, self.relu_before_norm, "eval").data

    def check_disjoint(self, classes):
        overlap = set(self.params.class_ids) & set(classes)
        if overlap:
            raise ContractError(f"reference extractor was trained on episode classes {sorted(overlap)}")


@dataclass
class HardnessScore:
    omega: float
    episode_id: int = 0
    way: int = 0
    shot: int = 0
    degenerate: bool = False


def log_odds_of_error(p_true):
    """Mean of ``log((1 - p) / p)`` with ``p`` clamped to ``[1e-12, 1 - 1e-12]``."""
    p = np.clip(np.asarray(p_true, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    return float(np.mean(np.log1p(-p) - np.log(p)))


def hardness_from_logits(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    return log_odds_of_error(p[np.arange(len(labels)), labels])


def hardness_from_embeddings(support_emb, support_y, query_emb, query_y, way):
    """Hardness given already-normalised embeddings of supports and queries."""
    head = init_from_embeddings(support_emb, support_y, way)
    logits = np.asarray(query_emb) @ head.w.data.T
    return hardness_from_logits(logits, np.asarray(query_y))


def hardness(episode, phi: ReferenceExtractor, episode_id=0) -> HardnessScore:
    if episode.query_shot < 1:
        raise ContractError("hardness needs at least one query per class")
    s_emb = phi(episode.support_x)
    q_emb = phi(episode.query_x)
    degenerate = False
    for k in range(episode.way):
        if not np.any(np.abs(s_emb[episode.support_y == k]) > 0):
            degenerate = True
            warnings.warn(f"episode {episode_id}: every support of class {k} embeds to zero",
                          RuntimeWarning, stacklevel=2)
    omega = hardness_from_embeddings(s_emb, episode.support_y, q_emb, episode.query_y,
                                     episode.way)
    assert math.isfinite(omega)
    return HardnessScore(omega, episode_id, episode.way, episode.shot, degenerate)
