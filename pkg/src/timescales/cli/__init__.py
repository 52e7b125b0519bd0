"""Command-line interface: ``timescales <group> <command> [options]``."""

from .main import main

__all__ = ["main"]
