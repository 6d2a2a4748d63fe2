"""Exception types raised by the package.

Plain input validation failures raise :class:`ValueError`; the classes below
flag numerical conditions that a caller may want to handle separately.
"""


class AccuracyError(ArithmeticError):
    """A numerical self-check (quadrature doubling, reference doubling) failed."""


class ModelDiagnosticsError(ValueError):
    """A spectral model cannot be built consistently (degenerate or non-positive spectrum)."""
