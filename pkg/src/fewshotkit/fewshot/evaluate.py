from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..ndgrad.tensor import NORM_EPS
from .adapt import AdaptConfig, build_model, finetune, head_forward, transductive_finetune

METHODS = ("init_only", "finetune", "transductive")


def mean_entropy(probs):
    p = np.clip(probs, NORM_EPS, 1.0)
    return float(-(probs * np.log(p)).sum(axis=1).mean())


@dataclass
class EpisodeResult:
    method: str
    accuracy: float
    predictions: np.ndarray
    probabilities: np.ndarray
    support_loss: list = field(default_factory=list)
    query_entropy: list = field(default_factory=list)
    entropy_before: float = float("nan")
    entropy_after: float = float("nan")
    duration: float = 0.0

    def to_json(self):
        return {
            "method": self.method,
            "accuracy": self.accuracy,
            "predictions": [int(p) for p in self.predictions],
            "probabilities": self.probabilities.tolist(),
            "support_loss": list(self.support_loss),
            "query_entropy": list(self.query_entropy),
            "entropy_before": self.entropy_before,
            "entropy_after": self.entropy_after,
            "duration": self.duration,
        }


def predict(probs):
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(probs, axis=1)


def evaluate_episode(theta, episode, method="transductive", config=None) -> EpisodeResult:
    """Adapt a fresh copy of ``theta`` to ``episode`` and score its queries.

    Adaptation sees the support set and, for ``transductive``, the query
    inputs; the query labels are used only for the final accuracy.
    """
    if method not in METHODS:
        raise ContractError(f"method must be one of {METHODS}, got {method!r}")
    if episode.query_shot < 1:
        raise ContractError("evaluation needs at least one query per class")
    config = config or AdaptConfig()
    t0 = time.perf_counter()
    model = build_model(theta, episode.support_x, episode.support_y, episode.way, config)
    before = head_forward(model, episode.query_x)
    traces = None
    if method == "finetune":
        model, traces = finetune(model, episode.support_x, episode.support_y, config)
    elif method == "transductive":
        model, traces = transductive_finetune(
            model, episode.support_x, episode.support_y, episode.query_x, config)
    probs = before if traces is None else head_forward(model, episode.query_x)
    preds = predict(probs)
    acc = float((preds == episode.query_y).sum()) / len(episode.query_y)
    return EpisodeResult(
        method=method,
        accuracy=acc,
        predictions=preds,
        probabilities=probs,
        support_loss=traces.support_loss if traces else [],
        query_entropy=traces.query_entropy if traces else [],
        entropy_before=mean_entropy(before),
        entropy_after=mean_entropy(probs),
        duration=time.perf_counter() - t0,
    )
