"""Exception types shared across the package.

The CLI maps these onto exit codes: precondition violations exit 2,
resource caps exit 3, I/O and container-format problems exit 4.
"""

from __future__ import annotations


class PreconditionError(ValueError):
    """An operation was called outside its stated domain."""


class MarginError(PreconditionError):
    """A pin sits too close to the box boundary for the requested radius."""


class EmptyShellError(PreconditionError):
    """Every shell in the requested radius range is empty."""


class NoFitError(PreconditionError):
    """Too few nonzero counts to fit a scaling exponent."""


class ResourceLimitError(RuntimeError):
    """A configured node/point/size cap was exceeded."""


class CountOverflowError(OverflowError):
    """A count left the unsigned 64-bit range."""


class SlabFormatError(ValueError):
    """A binary container failed magic/version/shape validation."""
