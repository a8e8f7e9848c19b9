"""Exception hierarchy shared by the qbass services."""
from __future__ import annotations

from typing import Optional


class QBassError(Exception):
    """Base class for every error raised by qbass."""


class InputError(QBassError, ValueError):
    """Malformed input: bad weights, wrong shapes, invalid parameters."""


class DimensionError(InputError):
    """Objects of different ambient dimension were combined."""


class DomainError(QBassError):
    """A mathematical precondition of an operation does not hold."""


class ConvexOrderError(DomainError):
    """The marginals are not in convex order."""


class InfeasibleError(DomainError):
    """A linear program that should be feasible was reported infeasible."""


class SizeLimitError(DomainError):
    """An instance exceeds the configured size guard."""


class GeneratingError(DomainError):
    """A convex function is not Bass generating for the given marginal."""


class ConvergenceError(DomainError):
    """An inner iterative solve did not reach its tolerance."""

    def __init__(self, message: str, residual: Optional[float] = None) -> None:
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


__all__ = [
    "QBassError",
    "InputError",
    "DimensionError",
    "DomainError",
    "ConvexOrderError",
    "InfeasibleError",
    "SizeLimitError",
    "GeneratingError",
    "ConvergenceError",
]
