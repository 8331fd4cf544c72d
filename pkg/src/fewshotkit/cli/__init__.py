"""Command-line orchestration of the full pipeline."""
from .config import RunConfig, load, parse, serialize
from .main import main

__all__ = ["RunConfig", "load", "main", "parse", "serialize"]
