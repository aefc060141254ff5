"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class LexMdpError(Exception):
    """Base class for all toolkit errors."""


class ModelValidationError(LexMdpError):
    """A model document or constructed model violates an invariant."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ModelFormatError(LexMdpError):
    """A model/strategy/layout file could not be parsed."""


class PreconditionError(LexMdpError):
    """A solver was called on an instance where its answer is undefined."""


class EnumerationCapError(LexMdpError):
    """Exhaustive strategy enumeration would exceed the configured cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"{count} deterministic strategies exceed the cap of {cap}")
