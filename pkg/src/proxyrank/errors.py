"""Exception types shared across the package.

ValidationError covers bad inputs and broken contracts (malformed files,
mismatched dimensions, missing columns).  NumericalError covers failures of
the numerics themselves (non-finite values, matrices outside tolerance).
The CLI maps the two to distinct exit codes.
"""

from __future__ import annotations


class ProxyRankError(Exception):
    """Base class for all package errors."""


class ValidationError(ProxyRankError):
    """Invalid input data or a violated interface contract.

    Carries an optional machine-readable ``report`` dict suitable for JSON
    emission (used by the CLI error reports).
    """

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report if report is not None else {"error": message}


class NumericalError(ProxyRankError):
    """A numerical operation failed or produced values outside tolerance."""
