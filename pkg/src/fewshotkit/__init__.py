"""Transductive fine-tuning baseline for few-shot classification, desk scale."""
__version__ = "0.1.0"
