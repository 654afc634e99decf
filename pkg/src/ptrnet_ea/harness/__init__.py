"""Configuration, persistence and report generation for experiments."""
from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, format_run_config, load_run_config, parse_run_config
from .runner import consolidate, evaluate_checkpoint, generate, run_baseline, run_training

__all__ = [
    "RunConfig",
    "consolidate",
    "decode_checkpoint",
    "encode_checkpoint",
    "evaluate_checkpoint",
    "format_run_config",
    "generate",
    "load_checkpoint",
    "load_run_config",
    "parse_run_config",
    "run_baseline",
    "run_training",
    "save_checkpoint",
]
