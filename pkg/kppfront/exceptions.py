"""Error kinds raised by the kppfront modules.

Every error derives from :class:`KPPFrontError` and from the builtin exception
that best describes it, so callers can catch either.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class KPPFrontError(Exception):
    """Root of all kppfront errors."""


class InvalidParameterError(KPPFrontError, ValueError):
    """A parameter or input violates a documented precondition."""


class KernelOverlapError(InvalidParameterError):
    """Mollifier width is too large for the atom spacing."""


class UnsupportedInputError(KPPFrontError, ValueError):
    """The operation is not defined for this kind of coefficient."""


class IterationLimitError(KPPFrontError, RuntimeError):
    """An iterative solver did not converge within its iteration budget."""

    def __init__(self, message: str, last_residual: float) -> None:
        super().__init__(f"{message} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


class SpuriousModeError(KPPFrontError, RuntimeError):
    """The computed eigenvector changes sign, so it is not the principal mode."""


class StabilityError(KPPFrontError, RuntimeError):
    """A time step violates the positivity/stability bound of its scheme."""


class BracketFailureError(KPPFrontError, RuntimeError):
    """No sign change of the dispersion function inside the search bracket."""


class PrincipalBranchError(KPPFrontError, RuntimeError):
    """The dispersion root does not carry a positive periodic eigenfunction."""


class BracketEscapeError(KPPFrontError, RuntimeError):
    """The speed minimizer lies on the edge of the scanned lambda range."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SchemeViolationError(KPPFrontError, RuntimeError):
    """A time step produced values outside the invariant range."""


class NoisyFrontError(KPPFrontError, RuntimeError):
    """Front positions move backwards beyond the jitter tolerance."""


class InsufficientEdgeError(KPPFrontError, RuntimeError):
    """The leading edge of the front is too short to fit a decay rate."""
