"""Prompt-evolving multitask design engine with hermetic oracles."""

__version__ = "0.1.0"
