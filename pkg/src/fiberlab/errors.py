"""Shared exception types.

Every failure mode that callers are expected to branch on gets its own
class; anything else surfaces as a plain ValueError/TypeError.
"""
from __future__ import annotations


class FiberlabError(Exception):
    """Base class for all package-specific failures."""


class PrecisionOverflow(FiberlabError):
    """Requested precision or mantissa exceeds the fixed-width contract."""


class OutOfBox(FiberlabError):
    """A point lies outside the declared bounding box."""


class MalformedHeader(FiberlabError):
    """A self-delimiting header is inconsistent with the remaining bits."""


class UnsupportedDimension(FiberlabError):
    """Construction requested outside the supported ambient dimensions."""


class CoverageGap(FiberlabError):
    """Declared charts fail to cover the target region, or a sample lies
    on no fiber of a candidate assignment."""


class EnumerationBudgetExceeded(FiberlabError):
    """A grid scan would exceed the configured cell budget."""


class NoMatch(FiberlabError):
    """Grid search found no acceptable point; the model is not effectively
    bi-Lipschitz at this scale."""


class AmbiguousCandidates(FiberlabError):
    """More than one candidate preimage cell is consistent with the query;
    signals an identifiability failure."""

    def __init__(self, message: str, candidates: tuple = ()):  # noqa: ANN001
        super().__init__(message)
        self.candidates = tuple(candidates)


class InsufficientData(FiberlabError):
    """Not enough distinct samples to fit the requested model."""


class MissingLedger(FiberlabError):
    """The exact-bookkeeping estimator needs a generation ledger."""


class MissingArtifacts(FiberlabError):
    """Report generation found no experiment outputs to summarize."""


class ConfigInvalid(FiberlabError):
    """A run configuration failed validation."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
