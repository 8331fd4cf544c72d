"""Hardness metric, accuracy statistics and the hardness regression."""
from .hardness import (
    HardnessScore,
    ReferenceExtractor,
    hardness,
    hardness_from_embeddings,
    hardness_from_logits,
    log_odds_of_error,
)
from .report import (
    HARDNESS_COLUMNS,
    LOSS_COLUMNS,
    RESULTS_COLUMNS,
    SCHEMA_VERSION,
    SWEEP_COLUMNS,
    csv_text,
    read_csv,
    write_csv,
    write_json,
)
from .stats import (
    RegressionFit,
    SummaryStats,
    correlate,
    first_quadrant_area,
    fit_hardness_curve,
    summarize,
)

__all__ = [
    "HARDNESS_COLUMNS", "HardnessScore", "LOSS_COLUMNS", "RESULTS_COLUMNS", "ReferenceExtractor",
    "RegressionFit", "SCHEMA_VERSION", "SWEEP_COLUMNS", "SummaryStats", "correlate", "csv_text",
    "first_quadrant_area", "fit_hardness_curve", "hardness", "hardness_from_embeddings",
    "hardness_from_logits", "log_odds_of_error", "read_csv", "summarize", "write_csv",
    "write_json",
]
