"""Checkpoint-guarded multi-agent orchestrator for automated sensitivity
analysis: learned method selection, semantic checkpoints, and a cross-session
archive around real numerical estimators."""

__version__ = "0.1.0"
