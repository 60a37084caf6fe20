"""Command-line interface for running experiments from config files."""

from frontdoor_mta.cli.commands import EXIT_CODES, app, exit_code_for

__all__ = ["EXIT_CODES", "app", "exit_code_for"]
