"""Datasets, disjoint class splits, episode sampling and episode files."""
from .dataset import (
    ClassSplit,
    Dataset,
    SyntheticSpec,
    augment,
    derive_seed,
    load_csv,
    make_rng,
    make_synthetic,
    split_classes,
)
from .episodes import Episode, mint_episodes, protocol_name, sample_episode
from .fileio import file_checksum, load_dataset, load_episodes, save_dataset, save_episodes

__all__ = [
    "ClassSplit", "Dataset", "Episode", "SyntheticSpec", "augment", "derive_seed",
    "file_checksum", "load_csv", "load_dataset", "load_episodes", "make_rng",
    "make_synthetic", "mint_episodes", "protocol_name", "sample_episode", "save_dataset",
    "save_episodes", "split_classes",
]
