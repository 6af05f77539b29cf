"""
Errors raised across the memory-stream packages.

Every error derives from SWMError so the CLI can map any library failure to a
single exit status. Input errors also derive from ValueError.
"""

from __future__ import annotations


class SWMError(Exception):
    """Base class for all library errors."""


class ShapeError(SWMError, ValueError):
    """Tensor extents do not fit the operation."""


class StateError(SWMError, ValueError):
    """A carried SSM state does not match the expected shape."""


class ConfigError(SWMError, ValueError):
    """Unknown or invalid configuration value."""


class NumericalError(SWMError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class EmptyContextError(SWMError, ValueError):
    """Attention called with no keys to attend to."""


class AlignmentError(SWMError, ValueError):
    """Memory tokens do not line up with the backbone token grid."""


class GapError(SWMError, ValueError):
    """Window stride larger than window length would skip frames."""


class FormatError(SWMError, ValueError):
    """Binary container or manifest is malformed."""


class DivergenceError(NumericalError):
    """Training loss became non-finite."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"Loss became non-finite ({loss}) at step {step}")
        self.step = step
        self.loss = loss
