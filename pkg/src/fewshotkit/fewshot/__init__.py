"""Support-based initialisation, fine-tuning and transductive fine-tuning."""
from .adapt import (
    UPDATE_ORDER,
    AdaptConfig,
    AdaptedModel,
    AdaptTraces,
    HeadParams,
    build_model,
    embed,
    entropy_weight,
    finetune,
    head_forward,
    head_logits,
    init_from_embeddings,
    support_init,
    transductive_finetune,
)
from .evaluate import METHODS, EpisodeResult, evaluate_episode, mean_entropy, predict

__all__ = [
    "AdaptConfig", "AdaptTraces", "AdaptedModel", "EpisodeResult", "HeadParams", "METHODS",
    "UPDATE_ORDER", "build_model", "embed", "entropy_weight", "evaluate_episode", "finetune",
    "head_forward", "head_logits", "init_from_embeddings", "mean_entropy", "predict",
    "support_init", "transductive_finetune",
]
