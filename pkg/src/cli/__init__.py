"""
Command-line subcommands.

Each module registers a group of subcommands. A handler takes the parsed
arguments and the resolved Settings and returns the JSON document printed on
stdout.
"""

from src.cli import apps, bench, evaluate, train, verify

COMMAND_GROUPS = (train, evaluate, apps, bench, verify)

__all__ = ["COMMAND_GROUPS"]
