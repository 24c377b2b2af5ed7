"""Exception hierarchy shared across the engine.

Every error carries an ``api_code`` so the HTTP layer can map it onto the
wire format without a big translation table.
"""

from __future__ import annotations


class BanditError(Exception):
    """Base class for all engine errors."""

    api_code = "internal"


class ParameterError(BanditError):
    """A caller-supplied value violates an operation's contract."""

    api_code = "invalid"


class CampaignError(BanditError):
    """The campaign itself is in a state the operation cannot accept
    (no arms, every arm blacklisted, ...)."""

    api_code = "invalid"


class ConfigurationError(BanditError):
    """Infeasible configuration, e.g. a floor that cannot be satisfied."""

    api_code = "infeasible"


class ConflictError(BanditError):
    """Duplicate identifier or a second writer on a single-writer resource."""

    api_code = "conflict"


class NotFoundError(BanditError):
    """Requested campaign, arm or file does not exist."""

    api_code = "not_found"


class LogGapError(BanditError):
    """The campaign log is missing a contiguous range of batch records."""

    api_code = "invalid"

    def __init__(self, message: str, missing: tuple[int, int]):
        super().__init__(message)
        self.missing = missing
