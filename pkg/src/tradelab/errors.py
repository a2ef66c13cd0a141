"""Shared exception base for the package.

Module-specific errors subclass :class:`TradeLabError` in the module that
owns them; the CLI treats any TradeLabError as a clean exit-1 diagnostic.
"""


class TradeLabError(Exception):
    """Base class for every error raised by tradelab."""
